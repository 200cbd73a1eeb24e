#include "glrd/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "glrd/errors.hpp"

namespace glrd::io {

using nlohmann::json;

namespace {

std::ifstream openIn(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return in;
}

std::ofstream openOut(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

const json& field(const json& j, const char* key, const char* what) {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string(what) + " is missing '" + key + "'");
    return *it;
}

}  // namespace

Box7DoF boxFromJson(const json& j) {
    if (!j.is_array() || j.size() != 7) throw InputError("box must be an array of 7 numbers");
    const auto v = j.get<std::vector<double>>();
    try {
        return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

json boxToJson(const Box7DoF& b) { return {b.cx(), b.cy(), b.cz(), b.l(), b.w(), b.h(), b.theta()}; }

SceneRecord sceneFromJson(const json& j) {
    if (!j.is_object()) throw InputError("scene record must be an object");
    try {
        SceneRecord rec;
        rec.sceneId = field(j, "sceneId", "scene record").get<std::string>();
        rec.context.sceneType = field(j, "sceneType", "scene record").get<std::string>();
        if (auto it = j.find("description"); it != j.end()) rec.context.description = it->get<std::string>();
        for (const auto& d : field(j, "detections", "scene record")) {
            Detection det{boxFromJson(field(d, "box", "detection")), field(d, "class", "detection").get<std::string>(),
                          1.0, std::nullopt};
            if (auto it = d.find("score"); it != d.end()) det.score = it->get<double>();
            if (auto it = d.find("classScores"); it != d.end()) det.classScores = it->get<ClassScores>();
            rec.detections.push_back(std::move(det));
        }
        return rec;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed scene record: ") + e.what());
    }
}

json sceneToJson(const SceneRecord& rec, bool withScores) {
    json dets = json::array();
    for (const auto& d : rec.detections) {
        json o = {{"box", boxToJson(d.box)}, {"class", d.classId}};
        if (withScores) {
            o["score"] = d.score;
            if (d.classScores) o["classScores"] = *d.classScores;
        }
        dets.push_back(std::move(o));
    }
    json j = {{"sceneId", rec.sceneId}, {"sceneType", rec.context.sceneType}};
    if (!rec.context.description.empty()) j["description"] = rec.context.description;
    j["detections"] = std::move(dets);
    return j;
}

std::vector<json> readJsonLines(std::istream& in, const std::string& what) {
    std::vector<json> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw InputError(what + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::vector<json> readJsonLinesFile(const std::string& path) {
    auto in = openIn(path);
    return readJsonLines(in, path);
}

std::vector<SceneRecord> readScenes(const std::string& path) {
    std::vector<SceneRecord> recs;
    std::set<std::string> ids;
    std::size_t n = 0;
    for (const auto& j : readJsonLinesFile(path)) {
        ++n;
        try {
            SceneRecord rec = sceneFromJson(j);
            validate(rec);
            if (!ids.insert(rec.sceneId).second) throw InputError("duplicate scene id '" + rec.sceneId + "'");
            recs.push_back(std::move(rec));
        } catch (const InputError& e) {
            throw InputError(path + ": record " + std::to_string(n) + ": " + e.what());
        }
    }
    return recs;
}

void writeScenes(std::ostream& out, const std::vector<SceneRecord>& recs, bool withScores) {
    for (const auto& r : recs) out << sceneToJson(r, withScores).dump() << '\n';
}

void writeScenesFile(const std::string& path, const std::vector<SceneRecord>& recs, bool withScores) {
    auto out = openOut(path);
    writeScenes(out, recs, withScores);
}

void writeRefinementLog(std::ostream& out, const std::vector<RefineResult>& results) {
    for (const auto& r : results) {
        if (r.log.errorKind != SceneErrorKind::None) {
            out << json{{"sceneId", r.log.sceneId},
                        {"error", r.log.error},
                        {"errorKind", r.log.errorKind == SceneErrorKind::Provider ? "provider" : "input"}}
                       .dump()
                << '\n';
            continue;
        }
        for (const auto& o : r.log.objects) {
            json transcript = json::array();
            for (const auto& u : o.transcript) transcript.push_back({{"role", u.role}, {"text", u.text}});
            out << json{{"sceneId", r.log.sceneId},
                        {"index", o.index},
                        {"originalClass", o.originalClass},
                        {"constraints",
                         {{"xConf", o.constraints.xConf},
                          {"xSize", o.constraints.xSize},
                          {"xScene", o.constraints.xScene}}},
                        {"solution",
                         {{"yKeep", o.solution.yKeep},
                          {"yRecls", o.solution.yRecls},
                          {"objective", o.solution.objective}}},
                        {"decision", psl::toString(o.decision)},
                        {"finalClass", o.finalClass},
                        {"transcript", std::move(transcript)}}
                       .dump()
                << '\n';
        }
    }
}

std::vector<balance::PseudoLabel2D> readPseudoLabels(const std::string& path) {
    std::vector<balance::PseudoLabel2D> labels;
    try {
        for (const auto& rec : readJsonLinesFile(path)) {
            for (const auto& l : field(rec, "labels", "pseudo-label record")) {
                balance::PseudoLabel2D p;
                p.bbox = field(l, "bbox", "pseudo label").get<std::array<double, 4>>();
                p.cls = field(l, "class", "pseudo label").get<std::string>();
                p.confidence = field(l, "confidence", "pseudo label").get<double>();
                p.simPos = field(l, "simPos", "pseudo label").get<double>();
                p.simNeg = field(l, "simNeg", "pseudo label").get<double>();
                if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
                    throw InputError("pseudo label confidence outside [0,1]");
                }
                p.validate();
                labels.push_back(std::move(p));
            }
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(path + ": " + e.what());
    }
    return labels;
}

std::vector<balance::ClassValues> readLossStream(const std::string& path) {
    std::vector<balance::ClassValues> stream;
    try {
        for (const auto& rec : readJsonLinesFile(path)) {
            auto losses = field(rec, "losses", "loss record").get<balance::ClassValues>();
            for (const auto& [cls, v] : losses) {
                if (!(v >= 0.0)) throw InputError("negative loss for class '" + cls + "'");
            }
            stream.push_back(std::move(losses));
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return stream;
}

ProposalDocument readProposals(const std::string& path) {
    auto in = openIn(path);
    ProposalDocument doc;
    try {
        const json j = json::parse(in);
        for (const auto& b : field(j, "boxes", "proposal document")) doc.proposals.boxes.push_back(boxFromJson(b));
        const auto rows = field(j, "classScores", "proposal document").get<std::vector<std::vector<double>>>();
        const std::size_t cols = rows.empty() ? 0 : rows.front().size();
        std::vector<double> flat;
        for (const auto& r : rows) {
            if (r.size() != cols) throw InputError("classScores rows differ in length");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        doc.proposals.classScores = balance::ScoreMatrix(rows.size(), cols, std::move(flat));
        doc.proposals.fgScores = field(j, "fgScores", "proposal document").get<std::vector<double>>();
        if (auto it = j.find("labels"); it != j.end()) {
            for (const auto& b : *it) doc.labels.push_back(boxFromJson(b));
        }
        doc.proposals.validate();
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(path + ": " + e.what());
    }
    return doc;
}

void writeTextFile(const std::string& path, const std::string& content) {
    auto out = openOut(path);
    out << content;
}

}  // namespace glrd::io
