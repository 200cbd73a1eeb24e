#include <doctest.h>

#include <sstream>

#include "glrd/cli.hpp"
#include "glrd/errors.hpp"
#include "glrd/io.hpp"
#include "oracles.hpp"

using namespace glrd;
using testing::dataPath;
using testing::slurp;
using testing::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run runCli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("config defaults and overrides") {
    const RunConfig d;
    CHECK(d.phiClip == 0.5);
    CHECK(d.sbc.deltaPhi == 0.05);
    CHECK(d.sbc.dBound == 0.5);
    CHECK(d.sbc.phiLo == 0.1);
    CHECK(d.sbc.phiHi == 0.9);
    CHECK(d.dbc.interval == 2000);
    CHECK(d.dbc.k == 5);
    CHECK(d.dbc.deltaW == 0.05);
    CHECK(d.dbc.wLo == 0.5);
    CHECK(d.dbc.wHi == 1.5);
    CHECK(d.baol.nPro == 1200);
    CHECK(d.baol.kPro == 1000);
    CHECK(d.baol.iouLo == 0.25);
    CHECK(d.baol.iouHi == 0.85);
    CHECK(d.refine.constraints.size.alpha == 0.25);
    CHECK(d.refine.constraints.size.phiSize == 0.05);
    CHECK(d.refine.thresholds.phiKeep == 0.01);
    CHECK(d.refine.thresholds.phiRecls == 0.2);
    CHECK(d.refine.policy == psl::SelectionPolicy::SceneConservative);
    CHECK_NOTHROW(d.validate());

    const auto round = RunConfig::fromJson(d.toJson());
    CHECK(round.toJson() == d.toJson());

    using nlohmann::json;
    const auto c = RunConfig::fromJson(json{{"psl", {{"weights", {1, 2, 3}}, {"policy", "min-keep"}}}, {"dbc", {{"k", 1}}}});
    CHECK(c.refine.weights.alpha2 == 2.0);
    CHECK(c.refine.policy == psl::SelectionPolicy::MinKeep);
    CHECK(c.dbc.k == 1);
    CHECK(c.dbc.interval == 2000);

    CHECK_THROWS_AS(RunConfig::fromJson(json{{"bogus", 1}}), InputError);
    CHECK_THROWS_AS(RunConfig::fromJson(json{{"psl", {{"phiKeep", 2.0}}}}), InputError);
    CHECK_THROWS_AS(RunConfig::fromJson(json{{"psl", {{"weights", {1, 2}}}}}), InputError);
    CHECK_THROWS_AS(RunConfig::fromJson(json{{"baol", {{"iouLo", 0.9}}}}), InputError);
    CHECK_THROWS_AS(RunConfig::fromJson(json{{"sbc", {{"deltaPhi", "big"}}}}), InputError);
    CHECK_THROWS_AS(RunConfig::fromJson(json{{"llm", {{"mode", "cloud"}}}}), InputError);
}

TEST_CASE("scene records round-trip") {
    const auto scenes = io::readScenes(dataPath("casestudy_detections.jsonl"));
    TempDir dir("io");
    io::writeScenesFile(dir.file("a.jsonl"), scenes);
    CHECK(io::readScenes(dir.file("a.jsonl")) == scenes);

    io::writeScenesFile(dir.file("gt.jsonl"), scenes, false);
    const auto gt = io::readScenes(dir.file("gt.jsonl"));
    CHECK(gt[1].detections[0].score == 1.0);
    CHECK_FALSE(gt[1].detections[0].classScores);

    dir.write("bad.jsonl", "{\"sceneId\": \"x\"}\n");
    CHECK_THROWS_AS(io::readScenes(dir.file("bad.jsonl")), InputError);
    dir.write("dup.jsonl", "{\"sceneId\":\"x\",\"sceneType\":\"a\",\"detections\":[]}\n"
                           "{\"sceneId\":\"x\",\"sceneType\":\"a\",\"detections\":[]}\n");
    CHECK_THROWS_AS(io::readScenes(dir.file("dup.jsonl")), InputError);
    dir.write("garbage.jsonl", "{not json\n");
    CHECK_THROWS_AS(io::readScenes(dir.file("garbage.jsonl")), InputError);
    dir.write("score.jsonl",
              "{\"sceneId\":\"x\",\"sceneType\":\"a\",\"detections\":[{\"box\":[0,0,0,1,1,1,0],\"class\":\"c\","
              "\"score\":1.5}]}\n");
    CHECK_THROWS_AS(io::readScenes(dir.file("score.jsonl")), InputError);
}

TEST_CASE("refine on the case studies") {
    TempDir dir("refine");
    const auto r = runCli({"refine", "--detections", dataPath("casestudy_detections.jsonl"), "--kb",
                           dataPath("kb.json"), "--out", dir.file("out.jsonl"), "--log", dir.file("log.jsonl"),
                           "--workers", "1"});
    CHECK(r.code == 0);
    CHECK(r.out == "kept 2, removed 1, reclassified 1\n");
    const auto refined = io::readScenes(dir.file("out.jsonl"));
    REQUIRE(refined.size() == 2);
    CHECK(refined[0].detections.size() == 1);
    CHECK(refined[1].detections[0].classId == "coffee table");
    const auto log = io::readJsonLinesFile(dir.file("log.jsonl"));
    REQUIRE(log.size() == 4);
    CHECK(log[0].at("decision") == "remove");
    CHECK(log[1].at("finalClass") == "coffee table");
    CHECK(log[1].at("transcript").size() == 4);
}

TEST_CASE("refine edge cases") {
    TempDir dir("refine_edge");
    const auto empty = dir.write("empty.jsonl", "");
    auto r = runCli({"refine", "--detections", empty, "--kb", dataPath("kb.json"), "--out", dir.file("o.jsonl")});
    CHECK(r.code == 0);
    CHECK(r.out == "kept 0, removed 0, reclassified 0\n");

    const auto kb = dir.write("kb.json", R"({"sizes": {"chair": [0.5, 0.5, 0.9], "hovercraft": [1, 1, 1]},
        "compat": {"library": ["chair"]}, "novel_classes": ["chair", "hovercraft"]})");
    const auto dets = dir.write("d.jsonl",
                                R"({"sceneId":"s","sceneType":"library","detections":[{"box":[0,0,0.45,0.5,0.5,0.9,0],"class":"chair","score":1},{"box":[3,0,0.5,1,1,1,0],"class":"lamp","score":0.9}]})"
                                "\n");
    // lamp is not novel in this KB, so it passes through.
    r = runCli({"refine", "--detections", dets, "--kb", kb});
    CHECK(r.code == 0);
    CHECK(r.out == "kept 1, removed 0, reclassified 0\n");

    // Novel class without a size prior.
    r = runCli({"refine", "--detections", dets, "--kb", dir.write("kb3.json", R"({"sizes": {"chair": [0.5, 0.5, 0.9]},
        "compat": {}, "novel_classes": ["chair", "lamp"]})")});
    CHECK(r.code == 1);
    CHECK(r.err.find("lamp") != std::string::npos);

    r = runCli({"refine", "--detections", dir.file("missing.jsonl"), "--kb", dataPath("kb.json")});
    CHECK(r.code == 1);
    r = runCli({"refine", "--detections", dets, "--kb", dataPath("kb.json"), "--policy", "nonsense"});
    CHECK(r.code == 1);
    r = runCli({"refine", "--detections", dets, "--kb", dataPath("kb.json"), "--llm", "maybe"});
    CHECK(r.code == 1);
    r = runCli({"frobnicate"});
    CHECK(r.code == 1);
}

TEST_CASE("solve-psl one-shots") {
    auto r = runCli({"solve-psl", "1", "1", "1"});
    CHECK(r.code == 0);
    CHECK(r.out == "yKeep 1.000000\nyRecls 0.000000\nobjective 3.000000\ndecision keep\n");
    r = runCli({"solve-psl", "0", "1", "1"});
    CHECK(r.out.find("decision remove") != std::string::npos);
    r = runCli({"solve-psl", "0.9", "0.5419", "1"});
    CHECK(r.out == "yKeep 0.900000\nyRecls 0.258100\nobjective 3.000000\ndecision reclassify\n");
    r = runCli({"solve-psl", "1.2", "0", "0"});
    CHECK(r.code == 1);
    r = runCli({"solve-psl", "1", "1"});
    CHECK(r.code == 1);
    r = runCli({"solve-psl", "0.8", "0.9084", "0", "--policy", "max-keep-min-recls"});
    CHECK(r.out.find("decision remove") == std::string::npos);
    r = runCli({"solve-psl", "1", "1", "1", "--weights", "2", "2", "2"});
    CHECK(r.out.find("objective 6.000000") != std::string::npos);
}

TEST_CASE("dbc-sim replays the three-class fixture") {
    TempDir dir("dbc");
    const auto losses = dir.write("l.jsonl", "{\"losses\": {\"A\": 5, \"B\": 1, \"C\": 3}}\n");
    const auto r = runCli({"dbc-sim", "--losses", losses, "--interval", "1", "--k", "1", "--out", dir.file("t.jsonl")});
    CHECK(r.code == 0);
    CHECK(r.out == "replayed 1 iterations, 1 updates\nA weight 1.05\nB weight 0.95\nC weight 1.00\n");
    const auto trace = io::readJsonLinesFile(dir.file("t.jsonl"));
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].at("weights").at("A").get<double>() == doctest::Approx(1.05));

    dir.write("neg.jsonl", "{\"losses\": {\"A\": -5}}\n");
    CHECK(runCli({"dbc-sim", "--losses", dir.file("neg.jsonl")}).code == 1);

    const auto cfg = dir.write("c.json", R"({"dbc": {"interval": 1, "k": 1}})");
    const auto viaConfig = runCli({"dbc-sim", "--config", cfg, "--losses", losses});
    CHECK(viaConfig.out == r.out);
}

TEST_CASE("balance runs reflection and the threshold loop") {
    TempDir dir("balance");
    std::ostringstream labels;
    auto add = [&](const std::string& cls, int n, double sp, double sn) {
        labels << "{\"image\": \"im\", \"labels\": [";
        for (int i = 0; i < n; ++i) {
            labels << (i ? "," : "") << "{\"bbox\": [0,0,10,10], \"class\": \"" << cls
                   << "\", \"confidence\": " << (0.05 + 0.9 * i / n) << ", \"simPos\": " << sp
                   << ", \"simNeg\": " << sn << "}";
        }
        labels << "]}\n";
    };
    add("A", 100, 2, 0);
    add("B", 30, 2, 0);
    add("C", 50, 0, 2);  // rejected by reflection
    const auto path = dir.write("labels.jsonl", labels.str());
    const auto r = runCli({"balance", "--labels", path, "--out", dir.file("trace.jsonl")});
    CHECK(r.code == 0);
    CHECK(r.out.find("reflection kept 130 of 180 labels") != std::string::npos);
    CHECK(r.out.find("converged") != std::string::npos);
    const auto trace = io::readJsonLinesFile(dir.file("trace.jsonl"));
    CHECK(trace.size() >= 2);
    CHECK(trace.front().at("thresholds").at("A") == 0.5);

    dir.write("bad.jsonl", "{\"labels\": [{\"bbox\": [5,0,1,10], \"class\": \"A\", \"confidence\": 0.5, "
                           "\"simPos\": 0, \"simNeg\": 0}]}\n");
    CHECK(runCli({"balance", "--labels", dir.file("bad.jsonl")}).code == 1);
}

TEST_CASE("baol on a small proposal document") {
    TempDir dir("baol");
    const auto doc = dir.write("p.json", R"({
        "boxes": [[0,0,0,2,2,2,0], [0.05,0,0,2,2,2,0], [10,0,0,1,1,1,0]],
        "classScores": [[0.9, 0.1], [0.8, 0.2], [0.3, 0.6]],
        "fgScores": [0.9, 0.8, 0.2],
        "labels": [[0,0,0,2,2,2,0]]})");
    const auto r = runCli({"baol", "--proposals", doc, "--out", dir.file("r.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("kept 3 of 3 proposals, foreground 2") != std::string::npos);
    const auto report = nlohmann::json::parse(slurp(dir.file("r.json")));
    CHECK(report.at("kept") == nlohmann::json({0, 1, 2}));
    CHECK(report.at("foreground") == nlohmann::json({1, 1, 0}));
    CHECK(report.at("loss").get<double>() > 0.0);

    dir.write("bad.json", R"({"boxes": [[0,0,0,1,1,1,0]], "classScores": [[0.5]], "fgScores": [0.5, 0.1]})");
    CHECK(runCli({"baol", "--proposals", dir.file("bad.json")}).code == 1);
}

TEST_CASE("eval and gen-synthetic") {
    TempDir dir("eval");
    const auto gt = dataPath("casestudy_detections.jsonl");
    auto r = runCli({"eval", "--detections", gt, "--gt", gt});
    CHECK(r.code == 0);
    CHECK(r.out.find("mAP@0.25 1.000000") != std::string::npos);

    r = runCli({"gen-synthetic", "--kb", dataPath("kb.json"), "--seed", "7", "--scenes", "20", "--out",
                dir.file("a.jsonl"), "--gt", dir.file("gt.jsonl"), "--log", dir.file("c.jsonl")});
    CHECK(r.code == 0);
    r = runCli({"gen-synthetic", "--kb", dataPath("kb.json"), "--seed", "7", "--scenes", "20", "--out",
                dir.file("b.jsonl")});
    CHECK(r.code == 0);
    CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
    CHECK_FALSE(slurp(dir.file("a.jsonl")).empty());

    r = runCli({"eval", "--detections", dir.file("gt.jsonl"), "--gt", dir.file("gt.jsonl")});
    CHECK(r.out.find("mAP@0.25 1.000000") != std::string::npos);
    r = runCli({"gen-synthetic", "--kb", dataPath("kb.json"), "--rate", "2"});
    CHECK(r.code == 1);
}
