#include "glrd/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "glrd/errors.hpp"
#include "glrd/io.hpp"

namespace glrd::cli {

using nlohmann::json;

namespace {

std::string fmt(double v, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

const std::string& requirePath(const std::string& path, const char* flag) {
    if (path.empty()) throw InputError(std::string("missing required input: ") + flag);
    return path;
}

json valuesToJson(const balance::ClassValues& v) {
    json j = json::object();
    for (const auto& [cls, x] : v) j[cls] = x;
    return j;
}

}  // namespace

int cmdRefine(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto scenes = io::readScenes(requirePath(cfg.paths.detections, "--detections"));
    KnowledgeBase kb = KnowledgeBase::load(requirePath(cfg.paths.kb, "--kb"));

    std::unique_ptr<llm::HttpLlmClient> client;
    std::unique_ptr<KnowledgeProvider> provider;
    if (cfg.llm.mode == LlmMode::Remote) {
        auto http = cfg.llm.http;
        const auto env = llm::HttpClientConfig::fromEnvironment();
        http.endpoint = env.endpoint;
        http.apiKey = env.apiKey;
        if (http.endpoint.empty()) throw InputError("remote mode needs GLRD_LLM_ENDPOINT");
        client = std::make_unique<llm::HttpLlmClient>(http);
        provider = std::make_unique<llm::RemoteKnowledgeProvider>(*client, std::move(kb), http.maxTokens);
    } else {
        provider = std::make_unique<KnowledgeBaseProvider>(std::move(kb));
    }

    std::size_t workers = cfg.workers;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    const auto results = refineScenes(scenes, *provider, cfg.refine, workers, client.get());

    if (!cfg.paths.out.empty()) {
        std::vector<SceneRecord> refined;
        refined.reserve(results.size());
        for (const auto& r : results) refined.push_back(r.refined);
        io::writeScenesFile(cfg.paths.out, refined);
    }
    if (!cfg.paths.log.empty()) {
        std::ostringstream log;
        io::writeRefinementLog(log, results);
        io::writeTextFile(cfg.paths.log, log.str());
    }

    const auto s = summarize(results);
    out << "kept " << s.kept << ", removed " << s.removed << ", reclassified " << s.reclassified << '\n';

    int code = kExitOk;
    for (const auto& r : results) {
        if (r.log.errorKind == SceneErrorKind::None) continue;
        err << "error: scene " << r.log.sceneId << ": " << r.log.error << '\n';
        code = std::max(code, r.log.errorKind == SceneErrorKind::Provider ? kExitProvider : kExitInput);
    }
    return code;
}

int cmdSolvePsl(const std::array<double, 3>& x, const RunConfig& cfg, std::ostream& out) {
    for (double v : x) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("constraint values must lie in [0,1]");
    }
    const auto rules = psl::buildGlrdRules({x[0], x[1], x[2]}, cfg.refine.weights);
    const auto sol = psl::solve(rules, cfg.refine.policy);
    out << "yKeep " << fmt(sol.yKeep) << '\n';
    out << "yRecls " << fmt(sol.yRecls) << '\n';
    out << "objective " << fmt(sol.objective) << '\n';
    out << "decision " << psl::toString(psl::decide(sol, cfg.refine.thresholds)) << '\n';
    return kExitOk;
}

int cmdBalance(const RunConfig& cfg, std::ostream& out) {
    const auto labels = io::readPseudoLabels(requirePath(cfg.paths.labels, "--labels"));
    const auto kept = balance::reflectFilter(labels, cfg.phiClip);

    std::set<std::string> classes;
    if (!cfg.paths.kb.empty()) {
        const auto kb = KnowledgeBase::load(cfg.paths.kb);
        classes.insert(kb.novelClasses.begin(), kb.novelClasses.end());
    } else {
        for (const auto& l : kept) classes.insert(l.cls);
    }
    if (classes.empty()) throw InputError("no novel classes to balance");

    const auto initial = cfg.sbcState({classes.begin(), classes.end()});
    const auto loop = balance::sbcLoop(
        [&](const balance::ClassValues& phi) { return balance::countAboveThreshold(kept, phi); }, initial);

    if (!cfg.paths.out.empty()) {
        std::ostringstream trace;
        for (std::size_t i = 0; i < loop.trace.size(); ++i) {
            trace << json{{"iteration", i}, {"thresholds", valuesToJson(loop.trace[i])}}.dump() << '\n';
        }
        io::writeTextFile(cfg.paths.out, trace.str());
    }

    out << "reflection kept " << kept.size() << " of " << labels.size() << " labels\n";
    out << (loop.converged ? "converged after " : "stopped at the iteration cap after ") << loop.iterations
        << " iterations\n";
    const auto counts = balance::countAboveThreshold(kept, loop.state.phiByClass);
    for (const auto& [cls, phi] : loop.state.phiByClass) {
        out << cls << " threshold " << fmt(phi, 2) << " labels " << counts.at(cls) << '\n';
    }
    return kExitOk;
}

int cmdDbcSim(const RunConfig& cfg, std::ostream& out) {
    const auto stream = io::readLossStream(requirePath(cfg.paths.losses, "--losses"));
    std::set<std::string> classes;
    for (const auto& rec : stream) {
        for (const auto& [cls, v] : rec) classes.insert(cls);
    }
    auto state = cfg.dbcState({classes.begin(), classes.end()});

    std::ostringstream trace;
    std::size_t updates = 0;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        state = balance::dbcAccumulate(stream[t], state);
        if (state.iterCount == 0) {
            ++updates;
            trace << json{{"iteration", t + 1}, {"weights", valuesToJson(state.wByClass)}}.dump() << '\n';
        }
    }
    if (!cfg.paths.out.empty()) io::writeTextFile(cfg.paths.out, trace.str());

    out << "replayed " << stream.size() << " iterations, " << updates << " updates\n";
    for (const auto& [cls, w] : state.wByClass) out << cls << " weight " << fmt(w, 2) << '\n';
    return kExitOk;
}

int cmdBaol(const RunConfig& cfg, std::ostream& out) {
    auto doc = io::readProposals(requirePath(cfg.paths.proposals, "--proposals"));
    auto& p = doc.proposals;
    if (p.boxes.size() > cfg.baol.nPro) {
        const auto n = static_cast<std::ptrdiff_t>(cfg.baol.nPro);
        const std::size_t cols = p.classScores.cols();
        p.boxes.erase(p.boxes.begin() + n, p.boxes.end());
        p.fgScores.erase(p.fgScores.begin() + n, p.fgScores.end());
        std::vector<double> head(p.classScores.data().begin(),
                                 p.classScores.data().begin() + n * static_cast<std::ptrdiff_t>(cols));
        p.classScores = balance::ScoreMatrix(cfg.baol.nPro, cols, std::move(head));
    }
    const std::size_t total = p.boxes.size() * p.classScores.cols();
    if (total == 0) throw InputError("proposal document has no scores");
    const auto compressed = balance::baolCompress(p, std::min(cfg.baol.kPro, total));

    const auto y = balance::assignForegroundLabels(compressed.boxes, doc.labels, cfg.baol.iouLo, cfg.baol.iouHi);
    std::vector<double> o;
    for (std::size_t idx : compressed.indexMap) o.push_back(p.fgScores[idx]);
    for (double v : o) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("foreground scores must lie in [0,1]");
    }
    const double loss = balance::baolLoss(y, o, cfg.baol.lambda);
    const auto dets = softNms(balance::compressedDetections(compressed));

    if (!cfg.paths.out.empty()) {
        json detJson = json::array();
        for (const auto& d : dets) {
            detJson.push_back({{"box", io::boxToJson(d.box)}, {"classIndex", d.classId}, {"score", d.score}});
        }
        const json report = {{"kept", compressed.indexMap}, {"foreground", y}, {"loss", loss}, {"detections", detJson}};
        io::writeTextFile(cfg.paths.out, report.dump(2) + "\n");
    }
    const auto fg = std::count(y.begin(), y.end(), 1);
    out << "kept " << compressed.boxes.size() << " of " << p.boxes.size() << " proposals, foreground " << fg
        << ", loss " << fmt(loss) << '\n';
    return kExitOk;
}

int cmdEval(const RunConfig& cfg, std::ostream& out) {
    const auto preds = io::readScenes(requirePath(cfg.paths.detections, "--detections"));
    const auto gt = io::readScenes(requirePath(cfg.paths.gt, "--gt"));
    const auto report = evalAp25(preds, gt);
    for (const auto& [cls, ap] : report.perClass) out << cls << " AP " << fmt(ap) << '\n';
    out << "mAP@0.25 " << fmt(report.mean) << '\n';
    if (!cfg.paths.out.empty()) {
        const json j = {{"perClass", report.perClass}, {"groundTruthCount", report.groundTruthCount},
                        {"mAP", report.mean}};
        io::writeTextFile(cfg.paths.out, j.dump(2) + "\n");
    }
    return kExitOk;
}

int cmdGenSynthetic(const RunConfig& cfg, std::ostream& out) {
    const auto kb = KnowledgeBase::load(requirePath(cfg.paths.kb, "--kb"));
    const auto data = generateSyntheticScenes(kb, cfg.seed, cfg.synthetic.scenes, cfg.synthetic.corruption);
    if (!cfg.paths.out.empty()) io::writeScenesFile(cfg.paths.out, data.detections);
    if (!cfg.paths.gt.empty()) io::writeScenesFile(cfg.paths.gt, data.groundTruth, false);
    if (!cfg.paths.log.empty()) {
        std::ostringstream log;
        for (const auto& c : data.corruptions) {
            log << json{{"sceneId", c.sceneId},
                        {"index", c.detectionIndex},
                        {"kind", toString(c.kind)},
                        {"trueClass", c.trueClass},
                        {"assignedClass", c.assignedClass}}
                       .dump()
                << '\n';
        }
        io::writeTextFile(cfg.paths.log, log.str());
    }
    out << "generated " << data.detections.size() << " scenes, " << data.objectCount << " objects, "
        << data.corruptions.size() << " corruptions\n";
    return kExitOk;
}

namespace {

// Flag values collected before the config file is known; set flags win.
struct Overrides {
    std::string config, detections, kb, gt, out, log, labels, losses, proposals, policy, llm;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    std::size_t scenes = 0;
    double rate = 0.0;
    double lambda = 0.0;
    int interval = 0;
    int k = 0;
    std::vector<double> weights;
};

struct Flag {
    CLI::Option* opt = nullptr;
    bool set() const { return opt && opt->count() > 0; }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Open-vocabulary 3D detection refinement with soft-logic reasoning", "glrd"};
    app.require_subcommand(1);
    Overrides o;
    std::map<std::string, Flag> flags;
    std::vector<double> x;

    auto add = [&](CLI::App* sub, const std::string& name, auto& into, const std::string& help) {
        flags[sub->get_name() + name] = {sub->add_option(name, into, help)};
    };
    auto common = [&](CLI::App* sub) { add(sub, "--config", o.config, "JSON run configuration"); };

    auto* refine = app.add_subcommand("refine", "keep / remove / reclassify novel-class detections");
    common(refine);
    add(refine, "--detections", o.detections, "input detections (JSON lines)");
    add(refine, "--kb", o.kb, "knowledge base (JSON)");
    add(refine, "--out", o.out, "refined detections output");
    add(refine, "--log", o.log, "per-object decision log output");
    add(refine, "--policy", o.policy, "max-keep-min-recls | min-keep | scene-conservative");
    add(refine, "--workers", o.workers, "worker threads (0: one per core)");
    add(refine, "--llm", o.llm, "off | remote");
    add(refine, "--weights", o.weights, "rule weights a1 a2 a3");
    flags["refine--weights"].opt->expected(3);

    auto* solvePsl = app.add_subcommand("solve-psl", "solve the three-rule program for one constraint vector");
    common(solvePsl);
    solvePsl->add_option("x", x, "xConf xSize xScene")->required()->expected(3);
    add(solvePsl, "--policy", o.policy, "max-keep-min-recls | min-keep | scene-conservative");
    add(solvePsl, "--weights", o.weights, "rule weights a1 a2 a3");
    flags["solve-psl--weights"].opt->expected(3);

    auto* bal = app.add_subcommand("balance", "reflection filtering and threshold balancing of pseudo labels");
    common(bal);
    add(bal, "--labels", o.labels, "pseudo labels (JSON lines)");
    add(bal, "--kb", o.kb, "knowledge base; its novel classes are balanced");
    add(bal, "--out", o.out, "threshold trace output");

    auto* dbc = app.add_subcommand("dbc-sim", "replay a loss stream through the loss-weight scheduler");
    common(dbc);
    add(dbc, "--losses", o.losses, "loss stream (JSON lines)");
    add(dbc, "--out", o.out, "weight trace output");
    add(dbc, "--interval", o.interval, "iterations between updates");
    add(dbc, "--k", o.k, "classes moved at each end of the ranking");

    auto* baol = app.add_subcommand("baol", "proposal compression, foreground labels and loss");
    common(baol);
    add(baol, "--proposals", o.proposals, "proposal document (JSON)");
    add(baol, "--out", o.out, "report output (JSON)");
    add(baol, "--lambda", o.lambda, "background weight of the loss");

    auto* eval = app.add_subcommand("eval", "mAP at IoU 0.25");
    common(eval);
    add(eval, "--detections", o.detections, "predictions (JSON lines)");
    add(eval, "--gt", o.gt, "ground truth (JSON lines)");
    add(eval, "--out", o.out, "report output (JSON)");

    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic scene fixture");
    common(gen);
    add(gen, "--kb", o.kb, "knowledge base (JSON)");
    add(gen, "--seed", o.seed, "random seed");
    add(gen, "--scenes", o.scenes, "scene count");
    add(gen, "--rate", o.rate, "per-object corruption rate");
    add(gen, "--out", o.out, "corrupted detections output");
    add(gen, "--gt", o.gt, "ground truth output");
    add(gen, "--log", o.log, "corruption records output");

    std::vector<std::string> argvStore{"glrd"};
    argvStore.insert(argvStore.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argvStore) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    auto isSet = [&](const std::string& flag) {
        auto it = flags.find(name + flag);
        return it != flags.end() && it->second.set();
    };

    try {
        RunConfig cfg;
        if (isSet("--config")) cfg = RunConfig::load(o.config);
        auto& p = cfg.paths;
        if (isSet("--detections")) p.detections = o.detections;
        if (isSet("--kb")) p.kb = o.kb;
        if (isSet("--gt")) p.gt = o.gt;
        if (isSet("--out")) p.out = o.out;
        if (isSet("--log")) p.log = o.log;
        if (isSet("--labels")) p.labels = o.labels;
        if (isSet("--losses")) p.losses = o.losses;
        if (isSet("--proposals")) p.proposals = o.proposals;
        if (isSet("--workers")) cfg.workers = o.workers;
        if (isSet("--seed")) cfg.seed = o.seed;
        if (isSet("--scenes")) cfg.synthetic.scenes = o.scenes;
        if (isSet("--rate")) cfg.synthetic.corruption.rate = o.rate;
        if (isSet("--lambda")) cfg.baol.lambda = o.lambda;
        if (isSet("--interval")) cfg.dbc.interval = o.interval;
        if (isSet("--k")) cfg.dbc.k = o.k;
        if (isSet("--weights")) cfg.refine.weights = {o.weights[0], o.weights[1], o.weights[2]};
        if (isSet("--policy")) {
            try {
                cfg.refine.policy = psl::parsePolicy(o.policy);
            } catch (const std::invalid_argument& e) {
                throw InputError(e.what());
            }
        }
        if (isSet("--llm")) {
            if (o.llm == "off") {
                cfg.llm.mode = LlmMode::Off;
            } else if (o.llm == "remote") {
                cfg.llm.mode = LlmMode::Remote;
            } else {
                throw InputError("--llm must be 'off' or 'remote'");
            }
        }
        cfg.validate();

        if (name == "refine") return cmdRefine(cfg, out, err);
        if (name == "solve-psl") return cmdSolvePsl({x[0], x[1], x[2]}, cfg, out);
        if (name == "balance") return cmdBalance(cfg, out);
        if (name == "dbc-sim") return cmdDbcSim(cfg, out);
        if (name == "baol") return cmdBaol(cfg, out);
        if (name == "eval") return cmdEval(cfg, out);
        return cmdGenSynthetic(cfg, out);
    } catch (const ProviderError& e) {
        err << "error: " << e.what() << '\n';
        return kExitProvider;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

}  // namespace glrd::cli
