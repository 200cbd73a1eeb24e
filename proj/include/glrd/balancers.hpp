#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "glrd/geometry.hpp"

namespace glrd::balance {

using ClassCounts = std::map<std::string, long long>;
using ClassValues = std::map<std::string, double>;

// --- Reflection filtering of 2D pseudo labels --------------------------------

struct PseudoLabel2D {
    std::array<double, 4> bbox{};  // x1, y1, x2, y2 in pixels
    std::string cls;
    double confidence = 0.0;
    double simPos = 0.0;  // similarity logit against "This is a {cls}."
    double simNeg = 0.0;  // similarity logit against "This is not a {cls}."

    void validate() const;
};

/// Two-way softmax probability of the positive template.
double positiveProbability(double simPos, double simNeg);

/// Keeps labels whose positive-template probability is >= phiClip.
std::vector<PseudoLabel2D> reflectFilter(std::span<const PseudoLabel2D> labels, double phiClip = 0.5);

// --- Static balance: per-class confidence thresholds -------------------------

struct SbcState {
    ClassValues phiByClass;
    double deltaPhi = 0.05;
    double dBound = 0.5;
    double phiLo = 0.1;
    double phiHi = 0.9;
    int maxIters = 50;

    /// Every novel class starts from the same threshold.
    static SbcState uniform(const std::vector<std::string>& novelClasses, double phi2d);
};

struct SbcStepResult {
    SbcState state;
    bool changed = false;
    ClassValues offsets;  // d_c per class
};

/// One threshold update from per-class pseudo-label counts.
SbcStepResult sbcStep(const ClassCounts& counts, const SbcState& state);

/// Counts per class for a given threshold vector.
using LabelSource = std::function<ClassCounts(const ClassValues& phiByClass)>;

struct SbcLoopResult {
    SbcState state;
    int iterations = 0;
    bool converged = false;
    std::vector<ClassValues> trace;  // thresholds before each step, plus the final ones
};

/// Repeats sbcStep until no threshold moves or maxIters steps have run.
SbcLoopResult sbcLoop(const LabelSource& source, const SbcState& initial);

/// Count of labels per novel class with confidence >= that class's threshold.
ClassCounts countAboveThreshold(std::span<const PseudoLabel2D> labels, const ClassValues& phiByClass);

// --- Dynamic balance: per-class loss weights ----------------------------------

struct DbcState {
    ClassValues wByClass;
    ClassValues sumByClass;
    int iDbc = 2000;
    int k = 5;
    double deltaW = 0.05;
    double wLo = 0.5;
    double wHi = 1.5;
    int iterCount = 0;

    static DbcState initial(const std::vector<std::string>& classes);
    double weightOf(const std::string& cls) const;
};

/// Adds the weighted losses of one iteration; runs dbcUpdate when the
/// interval is reached. Classes seen for the first time start at weight 1.
DbcState dbcAccumulate(const ClassValues& lossByClass, const DbcState& state);

/// Rank by accumulated loss (ties by class name): the top-k gain deltaW, the
/// bottom-k lose it, within [wLo, wHi]. Sums and the counter reset.
DbcState dbcUpdate(const DbcState& state);

/// Per-class multiply by w_c; unknown classes use weight 1.
ClassValues scaleLoss(const ClassValues& lossByClass, const DbcState& state);

// --- Background-aware localization ----------------------------------------------

/// Row-major score matrix.
class ScoreMatrix {
  public:
    ScoreMatrix() = default;
    ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    ScoreMatrix(std::size_t rows, std::size_t cols) : ScoreMatrix(rows, cols, std::vector<double>(rows * cols)) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    const std::vector<double>& data() const { return data_; }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct ProposalSet {
    std::vector<Box7DoF> boxes;
    ScoreMatrix classScores;      // N_pro x N_class
    std::vector<double> fgScores;  // N_pro

    void validate() const;
};

struct CompressedProposals {
    std::vector<Box7DoF> boxes;         // B, in order of first appearance among the top entries
    ScoreMatrix scores;                 // S_B: rows of the foreground-weighted matrix restricted to B
    std::vector<std::size_t> indexMap;  // row of S_B -> original proposal index
};

/// Weights each row of S by its foreground score, keeps the boxes behind the
/// kPro largest entries (ties by flat index).
CompressedProposals baolCompress(const ProposalSet& proposals, std::size_t kPro);

/// Soft-NMS input from S_B: one entry per (box, class) whose score reaches `minScore`.
std::vector<ScoredBox> compressedDetections(const CompressedProposals& c, double minScore = 0.0);

/// Foreground labels for proposals: greedy one-to-one matching on descending
/// IoU, matched pairs below iouLo become background, unmatched proposals above
/// iouHi against any label become foreground.
std::vector<int> assignForegroundLabels(std::span<const Box7DoF> proposals, std::span<const Box7DoF> labels,
                                        double iouLo = 0.25, double iouHi = 0.85);

inline constexpr double kBaolEpsilon = 1e-7;

/// Foreground/background binary cross-entropy with background weight lambda.
double baolLoss(std::span<const int> y, std::span<const double> o, double lambda);

}  // namespace glrd::balance
