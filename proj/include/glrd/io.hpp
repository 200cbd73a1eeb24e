#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "glrd/balancers.hpp"
#include "glrd/pipeline.hpp"

namespace glrd::io {

// Scene records: {"sceneId", "sceneType", "description"?, "detections": [
//   {"box": [cx, cy, cz, l, w, h, theta], "class", "score"?, "classScores"?}]}
// A missing score reads as 1.0, which is how ground-truth files are read.
SceneRecord sceneFromJson(const nlohmann::json& j);
nlohmann::json sceneToJson(const SceneRecord& rec, bool withScores = true);

Box7DoF boxFromJson(const nlohmann::json& j);
nlohmann::json boxToJson(const Box7DoF& box);

/// Parses line-delimited JSON; blank lines are skipped. Errors name the line.
std::vector<nlohmann::json> readJsonLines(std::istream& in, const std::string& what);
std::vector<nlohmann::json> readJsonLinesFile(const std::string& path);

/// Scene records, checked for valid scores and unique scene ids.
std::vector<SceneRecord> readScenes(const std::string& path);
void writeScenes(std::ostream& out, const std::vector<SceneRecord>& recs, bool withScores = true);
void writeScenesFile(const std::string& path, const std::vector<SceneRecord>& recs, bool withScores = true);

/// One record per refined object, plus one per failed scene.
void writeRefinementLog(std::ostream& out, const std::vector<RefineResult>& results);

/// Pseudo-label records: {"image", "labels": [{"bbox", "class", "confidence", "simPos", "simNeg"}]}.
std::vector<balance::PseudoLabel2D> readPseudoLabels(const std::string& path);

/// Loss-stream records: {"losses": {"class": loss, ...}}.
std::vector<balance::ClassValues> readLossStream(const std::string& path);

struct ProposalDocument {
    balance::ProposalSet proposals;
    std::vector<Box7DoF> labels;
};

/// {"boxes": [[7]...], "classScores": [[...]...], "fgScores": [...], "labels": [[7]...]}
ProposalDocument readProposals(const std::string& path);

void writeTextFile(const std::string& path, const std::string& content);

}  // namespace glrd::io
