#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "glrd/errors.hpp"
#include "glrd/pipeline.hpp"

namespace glrd {

void CorruptionParams::validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InputError("corruption rate must lie in [0,1]");
    if (sceneSwapShare < 0.0 || sizeSwapShare < 0.0 || hallucinationShare < 0.0 ||
        sceneSwapShare + sizeSwapShare + hallucinationShare <= 0.0) {
        throw InputError("corruption shares must be nonnegative with a positive sum");
    }
    if (!(corruptedScoreLo >= 0.0 && corruptedScoreLo <= corruptedScoreHi && corruptedScoreHi <= 1.0)) {
        throw InputError("corrupted score range must satisfy 0 <= lo <= hi <= 1");
    }
    if (minObjects < 1 || maxObjects < minObjects || maxObjects > 8) {
        throw InputError("objects per scene must satisfy 1 <= min <= max <= 8");
    }
}

std::string toString(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::SceneSwap:
            return "scene-swap";
        case CorruptionKind::SizeSwap:
            return "size-swap";
        case CorruptionKind::Hallucination:
            return "hallucination";
    }
    return "?";
}

namespace {

// Draws are built from raw engine output so sequences do not depend on the
// standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

  private:
    std::mt19937_64 engine_;
};

constexpr int kGridSide = 4;
constexpr double kSlotSpacing = 3.0;
// Size-swap targets must fit the true box at most this well, which keeps the
// conflict strong enough for the solver to ask for reclassification.
constexpr double kSizeSwapMaxFit = 0.45;

Box7DoF placeBox(Rng& rng, int slot, const SizePrior& prior, double lo, double hi) {
    const double l = prior.lStd * rng.uniform(lo, hi);
    const double w = prior.wStd * rng.uniform(lo, hi);
    const double h = prior.hStd * rng.uniform(lo, hi);
    const double cx = (slot % kGridSide) * kSlotSpacing + rng.uniform(-0.2, 0.2);
    const double cy = (slot / kGridSide) * kSlotSpacing + rng.uniform(-0.2, 0.2);
    const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return {cx, cy, 0.5 * h, l, w, h, theta};
}

std::string pickOther(Rng& rng, const std::vector<std::string>& pool, const std::vector<std::string>& exclude) {
    std::vector<std::string> options;
    for (const auto& c : pool) {
        if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) options.push_back(c);
    }
    if (options.empty()) return {};
    return options[rng.below(options.size())];
}

}  // namespace

SyntheticDataset generateSyntheticScenes(const KnowledgeBase& kb, std::uint64_t seed, std::size_t sceneCount,
                                         const CorruptionParams& params) {
    params.validate();
    Rng rng(seed);

    std::vector<std::string> sceneTypes;
    for (const auto& [scene, classes] : kb.compat) {
        if (std::any_of(classes.begin(), classes.end(), [&](const std::string& c) { return kb.sizes.contains(c); })) {
            sceneTypes.push_back(scene);
        }
    }
    if (sceneTypes.empty()) throw InputError("knowledge base has no scene with sized classes");
    std::vector<std::string> allClasses;
    for (const auto& [cls, p] : kb.sizes) allClasses.push_back(cls);
    const std::vector<std::string> novel(kb.novelClasses.begin(), kb.novelClasses.end());

    const double shareTotal = params.sceneSwapShare + params.sizeSwapShare + params.hallucinationShare;
    SyntheticDataset data;

    for (std::size_t s = 0; s < sceneCount; ++s) {
        const std::string& sceneType = sceneTypes[rng.below(sceneTypes.size())];
        char idBuf[32];
        std::snprintf(idBuf, sizeof idBuf, "synth_%04zu", s);

        SceneRecord gt{idBuf, {sceneType, "synthetic " + sceneType}, {}};
        SceneRecord det{idBuf, gt.context, {}};

        std::vector<std::string> compatible, compatibleNovel, incompatibleNovel;
        for (const auto& c : kb.compat.at(sceneType)) {
            if (!kb.sizes.contains(c)) continue;
            compatible.push_back(c);
            if (kb.isNovel(c)) compatibleNovel.push_back(c);
        }
        for (const auto& c : novel) {
            if (!kb.compat.at(sceneType).contains(c)) incompatibleNovel.push_back(c);
        }

        std::vector<int> slots(kGridSide * kGridSide);
        for (int i = 0; i < kGridSide * kGridSide; ++i) slots[static_cast<std::size_t>(i)] = i;
        rng.shuffle(slots);
        std::size_t nextSlot = 0;

        const int count = params.minObjects + static_cast<int>(rng.below(
                                                  static_cast<std::size_t>(params.maxObjects - params.minObjects + 1)));
        for (int o = 0; o < count; ++o) {
            const std::string cls = compatible[rng.below(compatible.size())];
            const SizePrior& prior = kb.sizes.at(cls);
            const Box7DoF box = placeBox(rng, slots[nextSlot++], prior, 0.96, 1.04);
            gt.detections.push_back({box, cls, 1.0, std::nullopt});
            ++data.objectCount;

            ClassScores cleanScores{{cls, 1.0}};
            if (auto other = pickOther(rng, compatible, {cls}); !other.empty()) cleanScores[other] = rng.uniform(0.05, 0.3);
            Detection clean{box, cls, 1.0, cleanScores};

            if (!rng.bernoulli(params.rate)) {
                det.detections.push_back(std::move(clean));
                continue;
            }

            const double pick = rng.uniform() * shareTotal;
            CorruptionKind kind = pick < params.sceneSwapShare                          ? CorruptionKind::SceneSwap
                                  : pick < params.sceneSwapShare + params.sizeSwapShare ? CorruptionKind::SizeSwap
                                                                                        : CorruptionKind::Hallucination;

            std::vector<std::string> poorFits;
            for (const auto& c : compatibleNovel) {
                if (c != cls && sizeConstraint(box, kb.sizes.at(c)) < kSizeSwapMaxFit) poorFits.push_back(c);
            }
            if (kind == CorruptionKind::SizeSwap && poorFits.empty()) kind = CorruptionKind::SceneSwap;
            if (kind == CorruptionKind::SceneSwap && incompatibleNovel.empty()) kind = CorruptionKind::Hallucination;

            const double score = kind == CorruptionKind::SizeSwap
                                     ? rng.uniform(std::max(params.corruptedScoreLo, 0.85), params.corruptedScoreHi)
                                     : rng.uniform(params.corruptedScoreLo, params.corruptedScoreHi);

            if (kind == CorruptionKind::Hallucination) {
                det.detections.push_back(std::move(clean));
                const auto& pool = incompatibleNovel.empty() ? novel : incompatibleNovel;
                const std::string ghost = pool[rng.below(pool.size())];
                const Box7DoF ghostBox = placeBox(rng, slots[nextSlot++], kb.sizes.at(ghost), 0.6, 1.6);
                ClassScores ghostScores{{ghost, score}};
                if (auto other = pickOther(rng, allClasses, {ghost}); !other.empty()) {
                    ghostScores[other] = score * rng.uniform(0.1, 0.5);
                }
                data.corruptions.push_back({idBuf, det.detections.size(), kind, "", ghost});
                det.detections.push_back({ghostBox, ghost, score, ghostScores});
                continue;
            }

            const auto& targets = kind == CorruptionKind::SizeSwap ? poorFits : incompatibleNovel;
            const std::string wrong = targets[rng.below(targets.size())];
            ClassScores scores{{wrong, score}, {cls, score * rng.uniform(0.6, 0.9)}};
            if (auto other = pickOther(rng, allClasses, {wrong, cls}); !other.empty()) {
                scores[other] = score * rng.uniform(0.1, 0.3);
            }
            data.corruptions.push_back({idBuf, det.detections.size(), kind, cls, wrong});
            det.detections.push_back({box, wrong, score, scores});
        }
        data.groundTruth.push_back(std::move(gt));
        data.detections.push_back(std::move(det));
    }
    return data;
}

}  // namespace glrd
