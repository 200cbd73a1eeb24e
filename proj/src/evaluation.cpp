#include <algorithm>
#include <map>
#include <tuple>

#include "glrd/errors.hpp"
#include "glrd/pipeline.hpp"

namespace glrd {

double averagePrecision(std::span<const double> recall, std::span<const double> precision) {
    if (recall.size() != precision.size()) throw std::invalid_argument("averagePrecision: length mismatch");
    if (recall.empty()) return 0.0;
    std::vector<double> mrec{0.0};
    std::vector<double> mpre{0.0};
    mrec.insert(mrec.end(), recall.begin(), recall.end());
    mpre.insert(mpre.end(), precision.begin(), precision.end());
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    double ap = 0.0;
    for (std::size_t i = 1; i < mrec.size(); ++i) {
        if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
    }
    return ap;
}

ApReport evalAp(std::span<const SceneRecord> predictions, std::span<const SceneRecord> groundTruth,
                double iouThreshold) {
    std::map<std::string, const SceneRecord*, std::less<>> gtById;
    ApReport report;
    for (const auto& rec : groundTruth) {
        if (!gtById.emplace(rec.sceneId, &rec).second) throw InputError("duplicate ground-truth scene '" + rec.sceneId + "'");
        for (const auto& d : rec.detections) ++report.groundTruthCount[d.classId];
    }

    struct Candidate {
        double score;
        const std::string* sceneId;
        std::size_t index;
        const Detection* det;
    };
    std::map<std::string, std::vector<Candidate>> byClass;
    for (const auto& rec : predictions) {
        if (!gtById.contains(rec.sceneId)) throw InputError("prediction scene '" + rec.sceneId + "' has no ground truth");
        for (std::size_t i = 0; i < rec.detections.size(); ++i) {
            const auto& d = rec.detections[i];
            byClass[d.classId].push_back({d.score, &rec.sceneId, i, &d});
        }
    }

    double sum = 0.0;
    for (const auto& [cls, npos] : report.groundTruthCount) {
        auto& cands = byClass[cls];
        // Scene id and index break score ties so scene order does not matter.
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(b.score, *a.sceneId, a.index) < std::tie(a.score, *b.sceneId, b.index);
        });

        std::map<std::string, std::vector<bool>, std::less<>> taken;
        std::vector<double> recall, precision;
        std::size_t tp = 0, fp = 0;
        for (const auto& c : cands) {
            const SceneRecord& gt = *gtById.at(*c.sceneId);
            auto& used = taken[*c.sceneId];
            used.resize(gt.detections.size(), false);

            double best = -1.0;
            std::size_t bestIdx = 0;
            for (std::size_t g = 0; g < gt.detections.size(); ++g) {
                if (gt.detections[g].classId != cls) continue;
                const double v = iou3d(c.det->box, gt.detections[g].box);
                if (v > best) {
                    best = v;
                    bestIdx = g;
                }
            }
            if (best >= iouThreshold && !used[bestIdx]) {
                used[bestIdx] = true;
                ++tp;
            } else {
                ++fp;
            }
            recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
            precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        }
        const double ap = averagePrecision(recall, precision);
        report.perClass[cls] = ap;
        sum += ap;
    }
    if (!report.groundTruthCount.empty()) sum /= static_cast<double>(report.groundTruthCount.size());
    report.mean = sum;
    return report;
}

}  // namespace glrd
