#include "glrd/balancers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace glrd::balance {

void PseudoLabel2D::validate() const {
    if (!(bbox[0] < bbox[2] && bbox[1] < bbox[3])) throw std::invalid_argument("pseudo label bbox must have x1<x2, y1<y2");
}

double positiveProbability(double simPos, double simNeg) {
    // e^p / (e^p + e^n) = 1 / (1 + e^(n - p))
    return 1.0 / (1.0 + std::exp(simNeg - simPos));
}

std::vector<PseudoLabel2D> reflectFilter(std::span<const PseudoLabel2D> labels, double phiClip) {
    if (!(phiClip >= 0.0 && phiClip <= 1.0)) throw std::invalid_argument("phiClip must lie in [0,1]");
    std::vector<PseudoLabel2D> kept;
    for (const auto& l : labels) {
        if (positiveProbability(l.simPos, l.simNeg) >= phiClip) kept.push_back(l);
    }
    return kept;
}

SbcState SbcState::uniform(const std::vector<std::string>& novelClasses, double phi2d) {
    SbcState s;
    for (const auto& c : novelClasses) s.phiByClass[c] = phi2d;
    return s;
}

namespace {
// Thresholds this close to a bound count as sitting on it.
constexpr double kBoundTol = 1e-9;
}  // namespace

SbcStepResult sbcStep(const ClassCounts& counts, const SbcState& state) {
    if (state.phiByClass.empty()) throw std::invalid_argument("sbcStep: empty class set");
    if (counts.size() != state.phiByClass.size() ||
        !std::equal(counts.begin(), counts.end(), state.phiByClass.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw std::invalid_argument("sbcStep: counts must cover exactly the novel classes");
    }

    SbcStepResult out{state, false, {}};
    double total = 0.0;
    for (const auto& [cls, n] : counts) total += static_cast<double>(n);
    const double avg = total / static_cast<double>(counts.size());
    if (avg <= 0.0) return out;

    for (const auto& [cls, n] : counts) {
        const double d = (static_cast<double>(n) - avg) / avg;
        out.offsets[cls] = d;
        double& phi = out.state.phiByClass[cls];
        const bool inside = phi > state.phiLo + kBoundTol && phi < state.phiHi - kBoundTol;
        if (std::abs(d) > state.dBound && inside) {
            phi = std::clamp(phi + (d > 0.0 ? state.deltaPhi : -state.deltaPhi), state.phiLo, state.phiHi);
            out.changed = true;
        }
    }
    return out;
}

SbcLoopResult sbcLoop(const LabelSource& source, const SbcState& initial) {
    SbcLoopResult out{initial, 0, false, {}};
    while (out.iterations < initial.maxIters) {
        out.trace.push_back(out.state.phiByClass);
        auto step = sbcStep(source(out.state.phiByClass), out.state);
        ++out.iterations;
        out.state = std::move(step.state);
        if (!step.changed) {
            out.converged = true;
            break;
        }
    }
    out.trace.push_back(out.state.phiByClass);
    return out;
}

ClassCounts countAboveThreshold(std::span<const PseudoLabel2D> labels, const ClassValues& phiByClass) {
    ClassCounts counts;
    for (const auto& [cls, phi] : phiByClass) counts[cls] = 0;
    for (const auto& l : labels) {
        auto it = phiByClass.find(l.cls);
        if (it != phiByClass.end() && l.confidence >= it->second) ++counts[l.cls];
    }
    return counts;
}

DbcState DbcState::initial(const std::vector<std::string>& classes) {
    DbcState s;
    for (const auto& c : classes) {
        s.wByClass[c] = 1.0;
        s.sumByClass[c] = 0.0;
    }
    return s;
}

double DbcState::weightOf(const std::string& cls) const {
    auto it = wByClass.find(cls);
    return it == wByClass.end() ? 1.0 : it->second;
}

DbcState dbcAccumulate(const ClassValues& lossByClass, const DbcState& state) {
    DbcState next = state;
    for (const auto& [cls, loss] : lossByClass) {
        if (loss < 0.0) throw std::invalid_argument("dbcAccumulate: losses must be nonnegative");
        if (!next.wByClass.contains(cls)) next.wByClass[cls] = 1.0;
        next.sumByClass[cls] += loss * next.wByClass[cls];
    }
    ++next.iterCount;
    if (next.iterCount >= next.iDbc) return dbcUpdate(next);
    return next;
}

DbcState dbcUpdate(const DbcState& state) {
    DbcState next = state;
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [cls, w] : state.wByClass) {
        auto it = state.sumByClass.find(cls);
        ranked.emplace_back(cls, it == state.sumByClass.end() ? 0.0 : it->second);
    }
    // Hardest first; equal sums fall back to class-name order.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, state.k)), ranked.size() / 2);
    for (std::size_t i = 0; i < k; ++i) {
        double& top = next.wByClass[ranked[i].first];
        if (top < state.wHi) top = std::min(top + state.deltaW, state.wHi);
        double& bottom = next.wByClass[ranked[ranked.size() - 1 - i].first];
        if (bottom > state.wLo) bottom = std::max(bottom - state.deltaW, state.wLo);
    }
    for (auto& [cls, sum] : next.sumByClass) sum = 0.0;
    next.iterCount = 0;
    return next;
}

ClassValues scaleLoss(const ClassValues& lossByClass, const DbcState& state) {
    ClassValues out;
    for (const auto& [cls, loss] : lossByClass) out[cls] = loss * state.weightOf(cls);
    return out;
}

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) throw std::invalid_argument("score matrix size mismatch");
}

void ProposalSet::validate() const {
    if (classScores.rows() != boxes.size() || fgScores.size() != boxes.size()) {
        throw std::invalid_argument("proposal set: score dimensions do not match box count");
    }
}

CompressedProposals baolCompress(const ProposalSet& proposals, std::size_t kPro) {
    proposals.validate();
    const std::size_t nPro = proposals.boxes.size();
    const std::size_t nCls = proposals.classScores.cols();
    const std::size_t total = nPro * nCls;
    if (kPro < 1 || kPro > total) throw std::invalid_argument("baolCompress: kPro must lie in [1, N_pro * N_class]");

    std::vector<double> weighted(total);
    for (std::size_t i = 0; i < nPro; ++i) {
        for (std::size_t c = 0; c < nCls; ++c) {
            weighted[i * nCls + c] = proposals.fgScores[i] * proposals.classScores(i, c);
        }
    }

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto byScore = [&](std::size_t a, std::size_t b) {
        return std::tie(weighted[b], a) < std::tie(weighted[a], b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kPro), order.end(), byScore);

    CompressedProposals out;
    std::vector<bool> taken(nPro, false);
    for (std::size_t i = 0; i < kPro; ++i) {
        const std::size_t box = order[i] / nCls;
        if (taken[box]) continue;
        taken[box] = true;
        out.indexMap.push_back(box);
        out.boxes.push_back(proposals.boxes[box]);
    }
    std::vector<double> rows;
    rows.reserve(out.indexMap.size() * nCls);
    for (std::size_t box : out.indexMap) {
        rows.insert(rows.end(), weighted.begin() + static_cast<std::ptrdiff_t>(box * nCls),
                    weighted.begin() + static_cast<std::ptrdiff_t>((box + 1) * nCls));
    }
    out.scores = ScoreMatrix(out.indexMap.size(), nCls, std::move(rows));
    return out;
}

std::vector<ScoredBox> compressedDetections(const CompressedProposals& c, double minScore) {
    std::vector<ScoredBox> out;
    for (std::size_t r = 0; r < c.scores.rows(); ++r) {
        for (std::size_t k = 0; k < c.scores.cols(); ++k) {
            const double s = c.scores(r, k);
            if (s >= minScore && s > 0.0) out.push_back({c.boxes[r], std::clamp(s, 0.0, 1.0), static_cast<int>(k)});
        }
    }
    return out;
}

std::vector<int> assignForegroundLabels(std::span<const Box7DoF> proposals, std::span<const Box7DoF> labels,
                                        double iouLo, double iouHi) {
    if (!(iouLo < iouHi)) throw std::invalid_argument("assignForegroundLabels: iouLo must be below iouHi");
    std::vector<int> y(proposals.size(), 0);
    if (labels.empty()) return y;

    struct Pair {
        double iou;
        std::size_t p;
        std::size_t l;
    };
    std::vector<Pair> pairs;
    std::vector<double> maxIou(proposals.size(), 0.0);
    for (std::size_t p = 0; p < proposals.size(); ++p) {
        for (std::size_t l = 0; l < labels.size(); ++l) {
            const double v = iou3d(proposals[p], labels[l]);
            maxIou[p] = std::max(maxIou[p], v);
            if (v > 0.0) pairs.push_back({v, p, l});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });

    std::vector<bool> propUsed(proposals.size(), false);
    std::vector<bool> labelUsed(labels.size(), false);
    for (const auto& pr : pairs) {
        if (propUsed[pr.p] || labelUsed[pr.l]) continue;
        propUsed[pr.p] = labelUsed[pr.l] = true;
        y[pr.p] = pr.iou < iouLo ? 0 : 1;
    }
    for (std::size_t p = 0; p < proposals.size(); ++p) {
        if (!propUsed[p] && maxIou[p] > iouHi) y[p] = 1;
    }
    return y;
}

double baolLoss(std::span<const int> y, std::span<const double> o, double lambda) {
    if (y.size() != o.size()) throw std::invalid_argument("baolLoss: label and probability lengths differ");
    if (!(lambda >= 0.0)) throw std::invalid_argument("baolLoss: lambda must be nonnegative");
    if (y.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(o[i], kBaolEpsilon, 1.0 - kBaolEpsilon);
        sum += y[i] ? std::log(p) : lambda * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(y.size());
}

}  // namespace glrd::balance
