// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "glrd/balancers.hpp"
#include "glrd/cli.hpp"
#include "glrd/commonsense.hpp"
#include "glrd/geometry.hpp"
#include "glrd/io.hpp"
#include "glrd/pipeline.hpp"
#include "glrd/psl.hpp"
#include "oracles.hpp"

using namespace glrd;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

KnowledgeBase shippedKb() { return KnowledgeBase::load(testing::dataPath("kb.json")); }

psl::SolverOutput solveX(double c, double s, double sc, psl::SelectionPolicy p) {
    return psl::solve(psl::buildGlrdRules({c, s, sc}), p);
}

Outcome solverOracle() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unit(0.0, 1.0), wDist(0.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const psl::ConstraintVector x{unit(rng), unit(rng), unit(rng)};
        const psl::RuleWeights w{wDist(rng), wDist(rng), wDist(rng)};
        const auto rules = psl::buildGlrdRules(x, w);
        const double exact = psl::solve(rules).objective;
        const double brute = psl::bruteForceSolve(rules, 1e-3).objective;
        worst = std::max(worst, std::abs(exact - brute));
        o.require(exact >= brute - 1e-9, "brute force beat the exact solver on instance " + std::to_string(i));
    }
    o.require(worst <= 1e-3 + 1e-6, fmt("worst objective gap %.3g", worst));

    const auto a = solveX(1, 1, 1, psl::SelectionPolicy::MaxKeepMinRecls);
    o.require(std::abs(a.yKeep - 1) <= 1e-9 && std::abs(a.yRecls) <= 1e-9 && std::abs(a.objective - 3) <= 1e-9,
              "x=(1,1,1) closed form");
    const auto b = solveX(0, 1, 1, psl::SelectionPolicy::SceneConservative);
    o.require(std::abs(b.yKeep) <= 1e-9, "x=(0,1,1) closed form");
    const auto c = solveX(0.9, 0.5419, 1, psl::SelectionPolicy::SceneConservative);
    o.require(std::abs(c.yKeep - 0.9) <= 1e-9 && std::abs(c.yRecls - 0.2581) <= 1e-9, "x=(0.9,0.5419,1) closed form");

    const double t = secondsSince(t0);
    o.require(t < 10.0, fmt("took %.2f s", t));
    if (o.pass) o.detail = fmt("worst gap %.2g over 1000 instances, %.2f s", worst, t);
    return o;
}

Outcome identities() {
    using namespace psl;
    Outcome o;
    // Grid values are decimal fractions, so value identities hold to rounding (1e-12).
    constexpr double tol = 1e-12;
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        for (int j = 0; j <= 100; ++j) {
            const double y = j / 100.0;
            worst = std::max(worst, std::abs(lukNot(lukAnd(x, y)) - lukOr(lukNot(x), lukNot(y))));
            worst = std::max(worst, std::abs(lukNot(lukOr(x, y)) - lukAnd(lukNot(x), lukNot(y))));
            o.require((lukImplies(x, y) == 1.0) == (i <= j), "residuation at " + std::to_string(i) + "," + std::to_string(j));
        }
        worst = std::max(worst, std::abs(lukAnd(x, 1.0) - x));
        worst = std::max(worst, std::abs(lukOr(x, 0.0) - x));
        o.require(lukAnd(x, 0.0) == 0.0 && lukOr(x, 1.0) == 1.0, "absorbing elements");
        o.require(lukImplies(0.0, x) == 1.0 && lukImplies(x, 1.0) == 1.0, "implication boundaries");
    }
    o.require(worst <= tol, fmt("identity residual %.3g", worst));
    if (o.pass) o.detail = fmt("101x101 grid, max residual %.2g, residuation exact", worst);
    return o;
}

Outcome caseStudies() {
    Outcome o;
    const auto t0 = Clock::now();
    KnowledgeBaseProvider provider(shippedKb());
    const auto scenes = io::readScenes(testing::dataPath("casestudy_detections.jsonl"));
    o.require(scenes.size() == 2, "fixture has two scenes");
    if (!o.pass) return o;
    const auto livingRoom = refineScene(scenes[0], provider, {});
    const auto library = refineScene(scenes[1], provider, {});
    o.require(livingRoom.log.objects.size() == 1 && livingRoom.log.objects[0].decision == psl::Decision::Remove,
              "living-room toilet not removed");
    o.require(!library.log.objects.empty() && library.log.objects[0].decision == psl::Decision::Reclassify,
              "library book not reclassified");
    o.require(!library.log.objects.empty() && library.log.objects[0].finalClass == "coffee table",
              "debate winner is not coffee table");
    const double t = secondsSince(t0);
    o.require(t < 1.0, fmt("took %.3f s", t));
    if (o.pass) o.detail = fmt("toilet removed, book -> coffee table, %.3f s", t);
    return o;
}

Outcome sizeRegression() {
    Outcome o;
    const double d = deltaFit(2.20, 2.0);
    o.require(std::abs(d - 0.987578) <= 1e-6, fmt("delta(2.20, 2.0) = %.6f", d));
    o.require(std::abs(deltaFit(2.10, 2.0) - 1.0) <= 1e-6, "5% error should sit in the deadband");
    const double xs = sizeConstraint(Box7DoF(0, 0, 0, 2.2, 1.0, 0.5, 0), {2.0, 1.0, 0.5});
    o.require(std::abs(xs - 0.995859) <= 1e-6, fmt("one-dim-off xSize = %.6f", xs));

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ext(0.05, 5.0), factor(0.01, 100.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Box7DoF box(0, 0, 0, ext(rng), ext(rng), ext(rng), 0.0);
        const SizePrior prior{ext(rng), ext(rng), ext(rng)};
        const double f = factor(rng);
        const SizePrior scaled{prior.lStd * f, prior.wStd * f, prior.hStd * f};
        worst = std::max(worst, std::abs(sizeConstraint(box, prior) - sizeConstraint(box.scaled(f), scaled)));
    }
    o.require(worst <= 1e-12, fmt("scale residual %.3g", worst));
    if (o.pass) o.detail = fmt("delta %.6f, xSize %.6f, scale residual ", d, xs) + fmt("%.2g", worst);
    return o;
}

Outcome sbc() {
    using namespace balance;
    Outcome o;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> base(20, 5000);
    int maxIters = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::string, double> scale;
        std::vector<std::string> classes;
        const int n = 2 + trial % 9;
        for (int c = 0; c < n; ++c) {
            classes.push_back("c" + std::to_string(c));
            scale[classes.back()] = base(rng);
        }
        // Strictly decreasing in the threshold.
        const LabelSource source = [&](const ClassValues& phi) {
            ClassCounts counts;
            for (const auto& [cls, p] : phi) counts[cls] = std::llround(scale[cls] * (1.0 - p) * 10.0) + 1;
            return counts;
        };
        const auto r = sbcLoop(source, SbcState::uniform(classes, 0.5));
        maxIters = std::max(maxIters, r.iterations);
        o.require(r.iterations <= 50, "more than 50 iterations");
        const auto final = sbcStep(source(r.state.phiByClass), r.state);
        for (const auto& [cls, d] : final.offsets) {
            const double phi = r.state.phiByClass.at(cls);
            const bool clamped = std::abs(phi - 0.1) < 1e-9 || std::abs(phi - 0.9) < 1e-9;
            o.require(std::abs(d) <= 0.5 || clamped, "trial " + std::to_string(trial) + " class " + cls + " unbalanced");
        }
    }
    const auto step = sbcStep({{"A", 100}, {"B", 50}, {"C", 30}}, SbcState::uniform({"A", "B", "C"}, 0.5));
    int moved = 0;
    for (const auto& [cls, phi] : step.state.phiByClass) moved += phi != 0.5;
    o.require(moved == 1 && std::abs(step.state.phiByClass.at("A") - 0.55) < 1e-12, "worked example");
    if (o.pass) o.detail = "200 monotone sources, at most " + std::to_string(maxIters) + " iterations; example moves A only";
    return o;
}

Outcome dbc() {
    using namespace balance;
    Outcome o;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> loss(0.0, 10.0);
    int updates = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> classes;
        const int n = 2 + trial % 12;
        for (int c = 0; c < n; ++c) classes.push_back("c" + std::to_string(c));
        auto state = DbcState::initial(classes);
        state.iDbc = 1 + trial % 4;
        state.k = 1 + trial % 3;
        for (int it = 0; it < 400; ++it) {
            ClassValues l;
            for (const auto& c : classes) l[c] = loss(rng) * (1.0 + std::stoi(c.substr(1)) % 3);
            const auto next = dbcAccumulate(l, state);
            if (next.iterCount == 0) {
                ++updates;
                int changed = 0;
                for (const auto& c : classes) {
                    const double before = state.weightOf(c), after = next.weightOf(c);
                    if (before == after) continue;
                    ++changed;
                    const bool step = std::abs(std::abs(after - before) - 0.05) < 1e-12;
                    const bool clamped = after == 0.5 || after == 1.5;
                    o.require(step || clamped, "weight moved by something other than 0.05");
                }
                o.require(changed <= 2 * state.k, "more than 2k weights changed");
            }
            for (const auto& [c, w] : next.wByClass) o.require(w >= 0.5 && w <= 1.5, "weight out of [0.5, 1.5]");
            state = next;
        }
    }
    auto fx = DbcState::initial({"A", "B", "C"});
    fx.iDbc = 1;
    fx.k = 1;
    fx = dbcAccumulate({{"A", 5}, {"B", 1}, {"C", 3}}, fx);
    o.require(std::abs(fx.weightOf("A") - 1.05) < 1e-12 && std::abs(fx.weightOf("B") - 0.95) < 1e-12 &&
                  fx.weightOf("C") == 1.0,
              "3-class fixture");
    if (o.pass) o.detail = std::to_string(updates) + " updates within bounds; fixture (1.05, 0.95, 1.00)";
    return o;
}

Outcome geometry() {
    Outcome o;
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Box7DoF a = testing::randomBox(rng), b = testing::randomBox(rng);
        worst = std::max(worst, std::abs(iou3d(a, b) - testing::monteCarloIou(a, b, 47, 1000 + i)));
    }
    o.require(worst <= 5e-3, fmt("worst Monte-Carlo gap %.3g", worst));

    const Box7DoF cube(0, 0, 0, 1, 1, 1, 0.3);
    o.require(std::abs(iou3d(cube, cube) - 1.0) <= 1e-9, "identity");
    o.require(std::abs(iou3d(cube, Box7DoF(5, 5, 5, 1, 1, 1, 0))) <= 1e-9, "disjoint");
    o.require(std::abs(iou3d(Box7DoF(0, 0, 0, 1, 1, 1, 0), Box7DoF(0.5, 0, 0, 1, 1, 1, 0)) - 1.0 / 3.0) <= 1e-9,
              "half-offset cubes");

    const std::vector<ScoredBox> dup{{cube, 1.0, 0}, {cube, 1.0, 0}};
    const auto kept = softNms(dup);
    o.require(kept.size() == 2 && std::abs(kept[1].score - std::exp(-2.0)) <= 1e-9, "duplicate decay");
    if (o.pass) o.detail = fmt("200 pairs, worst MC gap %.2g (103823 samples each)", worst);
    return o;
}

Outcome evaluator() {
    Outcome o;
    const Box7DoF a(0, 0, 0, 1, 1, 1, 0), far(20, 0, 0, 1, 1, 1, 0);
    const std::vector<SceneRecord> gt{{"s", {"room", ""}, {{a, "chair", 1.0, std::nullopt}}}};
    const std::vector<SceneRecord> empty{{"s", {"room", ""}, {}}};
    const std::vector<SceneRecord> fpFirst{
        {"s", {"room", ""}, {{far, "chair", 0.9, std::nullopt}, {a, "chair", 0.8, std::nullopt}}}};
    o.require(evalAp25(gt, gt).mean == 1.0, "perfect");
    o.require(evalAp25(empty, gt).mean == 0.0, "empty");
    o.require(evalAp25(fpFirst, gt).mean == 0.5, "FP then TP");
    if (o.pass) o.detail = "perfect 1.0, empty 0.0, FP-then-TP 0.5";
    return o;
}

Outcome endToEnd() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto kb = shippedKb();
    KnowledgeBaseProvider provider(kb);
    const auto data = generateSyntheticScenes(kb, 7, 200);
    const auto results = refineScenes(data.detections, provider, {}, 1);
    std::vector<SceneRecord> refined;
    for (const auto& r : results) refined.push_back(r.refined);
    const double before = evalAp25(data.detections, data.groundTruth).mean;
    const double after = evalAp25(refined, data.groundTruth).mean;
    o.require(after > before, fmt("mAP did not improve: %.4f -> %.4f", before, after));

    std::map<std::string, const RefineResult*> byScene;
    for (const auto& r : results) byScene[r.log.sceneId] = &r;
    int checked = 0;
    for (const auto& c : data.corruptions) {
        if (c.kind != CorruptionKind::Hallucination) continue;
        for (const auto& obj : byScene.at(c.sceneId)->log.objects) {
            if (obj.index != c.detectionIndex || obj.constraints.xScene != 0.0) continue;
            ++checked;
            o.require(obj.decision == psl::Decision::Remove, "hallucination kept in " + c.sceneId);
        }
    }
    o.require(checked > 0, "no scene-incompatible hallucinations generated");
    const double t = secondsSince(t0);
    o.require(t < 30.0, fmt("took %.2f s", t));
    if (o.pass)
        o.detail = fmt("mAP@0.25 %.4f -> %.4f, ", before, after) + std::to_string(checked) +
                   " hallucinations removed, " + fmt("%.2f s", t);
    return o;
}

Outcome determinism() {
    Outcome o;
    testing::TempDir dir("accept");
    std::ostringstream out, err;
    const auto kb = testing::dataPath("kb.json");
    auto run = [&](std::vector<std::string> args) { return cli::run(args, out, err); };
    o.require(run({"gen-synthetic", "--kb", kb, "--seed", "7", "--scenes", "200", "--out", dir.file("d.jsonl")}) == 0,
              "gen-synthetic failed");
    for (const std::string w : {"1", "4"}) {
        o.require(run({"refine", "--detections", dir.file("d.jsonl"), "--kb", kb, "--workers", w, "--out",
                       dir.file("out" + w + ".jsonl"), "--log", dir.file("log" + w + ".jsonl")}) == 0,
                  "refine failed: " + err.str());
    }
    const auto out1 = testing::slurp(dir.file("out1.jsonl")), out4 = testing::slurp(dir.file("out4.jsonl"));
    const auto log1 = testing::slurp(dir.file("log1.jsonl")), log4 = testing::slurp(dir.file("log4.jsonl"));
    o.require(!out1.empty() && out1 == out4, "refined output differs");
    o.require(!log1.empty() && log1 == log4, "refinement log differs");
    if (o.pass) o.detail = "outputs and logs byte-identical (" + std::to_string(out1.size()) + " bytes)";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"solver matches brute force and closed forms", solverOracle},
        {"Lukasiewicz identities", identities},
        {"case studies", caseStudies},
        {"size constraint regression", sizeRegression},
        {"static balance", sbc},
        {"dynamic balance", dbc},
        {"geometry", geometry},
        {"evaluator fixtures", evaluator},
        {"end-to-end synthetic refinement", endToEnd},
        {"parallel determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    }
    return failed ? 1 : 0;
}
