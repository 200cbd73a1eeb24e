#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glrd/commonsense.hpp"
#include "glrd/detection.hpp"
#include "glrd/llm.hpp"
#include "glrd/psl.hpp"

namespace glrd {

struct Utterance {
    std::string role;  // "debater:<class>" or "judge"
    std::string text;
};

struct DebateOutcome {
    std::vector<std::string> candidates;
    std::string winner;
    std::map<std::string, double> perCandidateScore;
    std::vector<Utterance> transcript;
    bool remoteFallback = false;  // remote judge answer unusable, offline judge decided
};

struct RefineConfig {
    ConstraintConfig constraints;
    psl::RuleWeights weights;
    psl::DecisionThresholds thresholds;
    psl::SelectionPolicy policy = psl::SelectionPolicy::SceneConservative;
    int debateCandidates = 3;
};

/// Top candidates by class score (ties by name), at most `count`.
std::vector<std::string> debateCandidates(const Detection& det, int count = 3);

/// One argument per candidate, then a judge. Without `remote` the judge
/// scores each candidate as size fit x scene fit x class score and picks the
/// best (ties: higher class score, then name). With `remote` the debater and
/// judge prompts go to the model; a judge reply naming no candidate falls
/// back to the offline judge.
DebateOutcome debate(const Detection& det, const SceneContext& scene, KnowledgeProvider& provider,
                     const RefineConfig& cfg, llm::LlmClient* remote = nullptr);

struct ObjectLog {
    std::size_t index = 0;
    std::string originalClass;
    psl::ConstraintVector constraints;
    psl::SolverOutput solution;
    psl::Decision decision = psl::Decision::Keep;
    std::vector<Utterance> transcript;
    std::string finalClass;
};

enum class SceneErrorKind { None, Input, Provider };

struct RefinementLog {
    std::string sceneId;
    std::vector<ObjectLog> objects;
    std::size_t passedThrough = 0;
    SceneErrorKind errorKind = SceneErrorKind::None;
    std::string error;
};

struct RefineResult {
    SceneRecord refined;
    RefinementLog log;
};

/// Keep / remove / reclassify every novel-class detection of one scene.
/// On a knowledge or provider failure the scene comes back unchanged with the
/// error recorded in the log.
RefineResult refineScene(const SceneRecord& rec, KnowledgeProvider& provider, const RefineConfig& cfg,
                         llm::LlmClient* remote = nullptr);

/// Refines scenes on up to `workers` threads; results keep input order.
std::vector<RefineResult> refineScenes(std::span<const SceneRecord> recs, KnowledgeProvider& provider,
                                       const RefineConfig& cfg, std::size_t workers = 1,
                                       llm::LlmClient* remote = nullptr);

struct RefinementSummary {
    std::size_t kept = 0;
    std::size_t removed = 0;
    std::size_t reclassified = 0;
    std::size_t passedThrough = 0;  // base-class detections
    std::size_t failedScenes = 0;
};

RefinementSummary summarize(std::span<const RefineResult> results);

// --- Evaluation -------------------------------------------------------------------

struct ApReport {
    std::map<std::string, double> perClass;
    std::map<std::string, std::size_t> groundTruthCount;
    double mean = 0.0;
};

/// Area under the precision/recall curve with all-point interpolation.
double averagePrecision(std::span<const double> recall, std::span<const double> precision);

/// Per-class AP at a 3D IoU threshold, averaged over classes present in the
/// ground truth. A prediction takes its best-overlapping ground-truth box of
/// the same class in the same scene; if that box is already taken it counts
/// as a false positive.
ApReport evalAp(std::span<const SceneRecord> predictions, std::span<const SceneRecord> groundTruth,
                double iouThreshold = 0.25);

inline ApReport evalAp25(std::span<const SceneRecord> predictions, std::span<const SceneRecord> groundTruth) {
    return evalAp(predictions, groundTruth, 0.25);
}

// --- Synthetic fixtures ---------------------------------------------------------

struct CorruptionParams {
    double rate = 0.2;
    // Relative shares of the three corruption kinds.
    double sceneSwapShare = 1.0;
    double sizeSwapShare = 1.0;
    double hallucinationShare = 1.0;
    double corruptedScoreLo = 0.6;
    double corruptedScoreHi = 0.95;
    int minObjects = 3;
    int maxObjects = 8;

    void validate() const;
};

enum class CorruptionKind { SceneSwap, SizeSwap, Hallucination };

std::string toString(CorruptionKind kind);

struct CorruptionRecord {
    std::string sceneId;
    std::size_t detectionIndex = 0;  // index in the corrupted scene's detections
    CorruptionKind kind = CorruptionKind::SceneSwap;
    std::string trueClass;  // empty for hallucinations
    std::string assignedClass;
};

struct SyntheticDataset {
    std::vector<SceneRecord> groundTruth;
    std::vector<SceneRecord> detections;
    std::vector<CorruptionRecord> corruptions;
    std::size_t objectCount = 0;
};

/// Scenes of knowledge-base-conformant objects plus a detector output where
/// each object is corrupted with probability `rate`. Deterministic in `seed`.
SyntheticDataset generateSyntheticScenes(const KnowledgeBase& kb, std::uint64_t seed, std::size_t sceneCount,
                                         const CorruptionParams& params = {});

}  // namespace glrd
