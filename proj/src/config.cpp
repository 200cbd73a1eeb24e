#include "glrd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "glrd/errors.hpp"

namespace glrd {

using nlohmann::json;

namespace {

void requireObject(const json& j, const std::string& where) {
    if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
}

void rejectUnknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.contains(key)) throw InputError("config: unknown key '" + where + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& into) {
    if (auto it = j.find(key); it != j.end()) into = it->get<T>();
}

void inRange(double v, double lo, double hi, const char* name) {
    if (!(v >= lo && v <= hi)) {
        throw InputError(std::string("config: ") + name + " must lie in [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
    }
}

const char* toString(LlmMode m) { return m == LlmMode::Remote ? "remote" : "off"; }

LlmMode parseLlmMode(const std::string& s) {
    if (s == "off") return LlmMode::Off;
    if (s == "remote") return LlmMode::Remote;
    throw InputError("config: llm mode must be 'off' or 'remote', got '" + s + "'");
}

}  // namespace

void RunConfig::validate() const {
    const auto& w = refine.weights;
    for (double a : {w.alpha1, w.alpha2, w.alpha3}) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw InputError("config: rule weights must be finite and nonnegative");
    }
    inRange(refine.thresholds.phiKeep, 0.0, 1.0, "psl.phiKeep");
    inRange(refine.thresholds.phiRecls, 0.0, 1.0, "psl.phiRecls");
    if (refine.debateCandidates < 1) throw InputError("config: psl.debateCandidates must be at least 1");
    if (!(refine.constraints.size.alpha > 0.0)) throw InputError("config: size.alpha must be positive");
    if (!(refine.constraints.size.phiSize >= 0.0)) throw InputError("config: size.phiSize must be nonnegative");
    inRange(phiClip, 0.0, 1.0, "phiClip");

    inRange(sbc.phiLo, 0.0, 1.0, "sbc.phiLo");
    inRange(sbc.phiHi, sbc.phiLo, 1.0, "sbc.phiHi");
    inRange(sbc.initialThreshold, sbc.phiLo, sbc.phiHi, "sbc.initialThreshold");
    if (!(sbc.deltaPhi > 0.0)) throw InputError("config: sbc.deltaPhi must be positive");
    if (!(sbc.dBound >= 0.0)) throw InputError("config: sbc.dBound must be nonnegative");
    if (sbc.maxIters < 1) throw InputError("config: sbc.maxIters must be at least 1");

    if (dbc.interval < 1) throw InputError("config: dbc.interval must be at least 1");
    if (dbc.k < 0) throw InputError("config: dbc.k must be nonnegative");
    if (!(dbc.deltaW > 0.0)) throw InputError("config: dbc.deltaW must be positive");
    if (!(dbc.wLo > 0.0 && dbc.wLo <= 1.0 && dbc.wHi >= 1.0)) {
        throw InputError("config: dbc weight bounds must satisfy 0 < wLo <= 1 <= wHi");
    }

    if (baol.kPro < 1 || baol.nPro < 1) throw InputError("config: baol.nPro and baol.kPro must be positive");
    inRange(baol.iouLo, 0.0, 1.0, "baol.iouLo");
    inRange(baol.iouHi, 0.0, 1.0, "baol.iouHi");
    if (!(baol.iouLo < baol.iouHi)) throw InputError("config: baol.iouLo must be below baol.iouHi");
    if (!(baol.lambda >= 0.0)) throw InputError("config: baol.lambda must be nonnegative");

    if (llm.http.maxRetries < 0 || llm.http.maxInFlight < 1 || llm.http.maxTokens < 1) {
        throw InputError("config: llm retries must be >= 0, maxInFlight and maxTokens >= 1");
    }
    synthetic.corruption.validate();
}

balance::SbcState RunConfig::sbcState(const std::vector<std::string>& classes) const {
    auto s = balance::SbcState::uniform(classes, sbc.initialThreshold);
    s.deltaPhi = sbc.deltaPhi;
    s.dBound = sbc.dBound;
    s.phiLo = sbc.phiLo;
    s.phiHi = sbc.phiHi;
    s.maxIters = sbc.maxIters;
    return s;
}

balance::DbcState RunConfig::dbcState(const std::vector<std::string>& classes) const {
    auto s = balance::DbcState::initial(classes);
    s.iDbc = dbc.interval;
    s.k = dbc.k;
    s.deltaW = dbc.deltaW;
    s.wLo = dbc.wLo;
    s.wHi = dbc.wHi;
    return s;
}

RunConfig RunConfig::fromJson(const json& doc, RunConfig cfg) {
    try {
        requireObject(doc, "<root>");
        rejectUnknown(doc, {"paths", "psl", "size", "scene", "phiClip", "sbc", "dbc", "baol", "llm", "synthetic",
                            "workers", "seed"},
                      "");
        if (auto it = doc.find("paths"); it != doc.end()) {
            requireObject(*it, "paths");
            rejectUnknown(*it, {"detections", "kb", "gt", "out", "log", "labels", "losses", "proposals"}, "paths.");
            auto& p = cfg.paths;
            read(*it, "detections", p.detections);
            read(*it, "kb", p.kb);
            read(*it, "gt", p.gt);
            read(*it, "out", p.out);
            read(*it, "log", p.log);
            read(*it, "labels", p.labels);
            read(*it, "losses", p.losses);
            read(*it, "proposals", p.proposals);
        }
        if (auto it = doc.find("psl"); it != doc.end()) {
            requireObject(*it, "psl");
            rejectUnknown(*it, {"weights", "phiKeep", "phiRecls", "policy", "debateCandidates"}, "psl.");
            if (auto w = it->find("weights"); w != it->end()) {
                const auto v = w->get<std::vector<double>>();
                if (v.size() != 3) throw InputError("config: psl.weights must hold three values");
                cfg.refine.weights = {v[0], v[1], v[2]};
            }
            read(*it, "phiKeep", cfg.refine.thresholds.phiKeep);
            read(*it, "phiRecls", cfg.refine.thresholds.phiRecls);
            if (auto p = it->find("policy"); p != it->end()) {
                try {
                    cfg.refine.policy = psl::parsePolicy(p->get<std::string>());
                } catch (const std::invalid_argument& e) {
                    throw InputError(std::string("config: ") + e.what());
                }
            }
            read(*it, "debateCandidates", cfg.refine.debateCandidates);
        }
        if (auto it = doc.find("size"); it != doc.end()) {
            requireObject(*it, "size");
            rejectUnknown(*it, {"alpha", "phiSize"}, "size.");
            read(*it, "alpha", cfg.refine.constraints.size.alpha);
            read(*it, "phiSize", cfg.refine.constraints.size.phiSize);
        }
        if (auto it = doc.find("scene"); it != doc.end()) {
            requireObject(*it, "scene");
            rejectUnknown(*it, {"unknownPairCompatible"}, "scene.");
            read(*it, "unknownPairCompatible", cfg.refine.constraints.unknownPairCompatible);
        }
        read(doc, "phiClip", cfg.phiClip);
        if (auto it = doc.find("sbc"); it != doc.end()) {
            requireObject(*it, "sbc");
            rejectUnknown(*it, {"initialThreshold", "deltaPhi", "dBound", "phiLo", "phiHi", "maxIters"}, "sbc.");
            read(*it, "initialThreshold", cfg.sbc.initialThreshold);
            read(*it, "deltaPhi", cfg.sbc.deltaPhi);
            read(*it, "dBound", cfg.sbc.dBound);
            read(*it, "phiLo", cfg.sbc.phiLo);
            read(*it, "phiHi", cfg.sbc.phiHi);
            read(*it, "maxIters", cfg.sbc.maxIters);
        }
        if (auto it = doc.find("dbc"); it != doc.end()) {
            requireObject(*it, "dbc");
            rejectUnknown(*it, {"interval", "k", "deltaW", "wLo", "wHi"}, "dbc.");
            read(*it, "interval", cfg.dbc.interval);
            read(*it, "k", cfg.dbc.k);
            read(*it, "deltaW", cfg.dbc.deltaW);
            read(*it, "wLo", cfg.dbc.wLo);
            read(*it, "wHi", cfg.dbc.wHi);
        }
        if (auto it = doc.find("baol"); it != doc.end()) {
            requireObject(*it, "baol");
            rejectUnknown(*it, {"nPro", "kPro", "iouLo", "iouHi", "lambda"}, "baol.");
            read(*it, "nPro", cfg.baol.nPro);
            read(*it, "kPro", cfg.baol.kPro);
            read(*it, "iouLo", cfg.baol.iouLo);
            read(*it, "iouHi", cfg.baol.iouHi);
            read(*it, "lambda", cfg.baol.lambda);
        }
        if (auto it = doc.find("llm"); it != doc.end()) {
            requireObject(*it, "llm");
            rejectUnknown(*it, {"mode", "timeoutMs", "maxRetries", "backoffMs", "maxInFlight", "maxTokens"}, "llm.");
            if (auto m = it->find("mode"); m != it->end()) cfg.llm.mode = parseLlmMode(m->get<std::string>());
            auto& h = cfg.llm.http;
            if (auto t = it->find("timeoutMs"); t != it->end()) h.timeout = std::chrono::milliseconds(t->get<long>());
            if (auto b = it->find("backoffMs"); b != it->end()) {
                h.initialBackoff = std::chrono::milliseconds(b->get<long>());
            }
            read(*it, "maxRetries", h.maxRetries);
            read(*it, "maxInFlight", h.maxInFlight);
            read(*it, "maxTokens", h.maxTokens);
        }
        if (auto it = doc.find("synthetic"); it != doc.end()) {
            requireObject(*it, "synthetic");
            rejectUnknown(*it, {"scenes", "rate", "sceneSwapShare", "sizeSwapShare", "hallucinationShare",
                                "corruptedScoreLo", "corruptedScoreHi", "minObjects", "maxObjects"},
                          "synthetic.");
            auto& c = cfg.synthetic.corruption;
            read(*it, "scenes", cfg.synthetic.scenes);
            read(*it, "rate", c.rate);
            read(*it, "sceneSwapShare", c.sceneSwapShare);
            read(*it, "sizeSwapShare", c.sizeSwapShare);
            read(*it, "hallucinationShare", c.hallucinationShare);
            read(*it, "corruptedScoreLo", c.corruptedScoreLo);
            read(*it, "corruptedScoreHi", c.corruptedScoreHi);
            read(*it, "minObjects", c.minObjects);
            read(*it, "maxObjects", c.maxObjects);
        }
        read(doc, "workers", cfg.workers);
        read(doc, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::fromJson(const json& doc) { return fromJson(doc, RunConfig{}); }

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("config '" + path + "': " + e.what());
    }
    return fromJson(doc);
}

json RunConfig::toJson() const {
    const auto& w = refine.weights;
    const auto& c = synthetic.corruption;
    return {
        {"paths",
         {{"detections", paths.detections},
          {"kb", paths.kb},
          {"gt", paths.gt},
          {"out", paths.out},
          {"log", paths.log},
          {"labels", paths.labels},
          {"losses", paths.losses},
          {"proposals", paths.proposals}}},
        {"psl",
         {{"weights", {w.alpha1, w.alpha2, w.alpha3}},
          {"phiKeep", refine.thresholds.phiKeep},
          {"phiRecls", refine.thresholds.phiRecls},
          {"policy", psl::toString(refine.policy)},
          {"debateCandidates", refine.debateCandidates}}},
        {"size", {{"alpha", refine.constraints.size.alpha}, {"phiSize", refine.constraints.size.phiSize}}},
        {"scene", {{"unknownPairCompatible", refine.constraints.unknownPairCompatible}}},
        {"phiClip", phiClip},
        {"sbc",
         {{"initialThreshold", sbc.initialThreshold},
          {"deltaPhi", sbc.deltaPhi},
          {"dBound", sbc.dBound},
          {"phiLo", sbc.phiLo},
          {"phiHi", sbc.phiHi},
          {"maxIters", sbc.maxIters}}},
        {"dbc", {{"interval", dbc.interval}, {"k", dbc.k}, {"deltaW", dbc.deltaW}, {"wLo", dbc.wLo}, {"wHi", dbc.wHi}}},
        {"baol",
         {{"nPro", baol.nPro},
          {"kPro", baol.kPro},
          {"iouLo", baol.iouLo},
          {"iouHi", baol.iouHi},
          {"lambda", baol.lambda}}},
        {"llm",
         {{"mode", toString(llm.mode)},
          {"timeoutMs", llm.http.timeout.count()},
          {"maxRetries", llm.http.maxRetries},
          {"backoffMs", llm.http.initialBackoff.count()},
          {"maxInFlight", llm.http.maxInFlight},
          {"maxTokens", llm.http.maxTokens}}},
        {"synthetic",
         {{"scenes", synthetic.scenes},
          {"rate", c.rate},
          {"sceneSwapShare", c.sceneSwapShare},
          {"sizeSwapShare", c.sizeSwapShare},
          {"hallucinationShare", c.hallucinationShare},
          {"corruptedScoreLo", c.corruptedScoreLo},
          {"corruptedScoreHi", c.corruptedScoreHi},
          {"minObjects", c.minObjects},
          {"maxObjects", c.maxObjects}}},
        {"workers", workers},
        {"seed", seed},
    };
}

}  // namespace glrd
