#include "glrd/commonsense.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "glrd/errors.hpp"

namespace glrd {

void SizePrior::validate() const {
    if (!(lStd > 0.0 && wStd > 0.0 && hStd > 0.0)) throw std::invalid_argument("size prior extents must be positive");
}

void KnowledgeBase::validate() const {
    for (const auto& [cls, prior] : sizes) {
        try {
            prior.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError("knowledge base: class '" + cls + "': " + e.what());
        }
    }
    for (const auto& cls : novelClasses) {
        if (!sizes.contains(cls)) throw InputError("knowledge base: novel class '" + cls + "' has no size entry");
    }
}

std::optional<SizePrior> KnowledgeBase::sizeOf(std::string_view cls) const {
    auto it = sizes.find(cls);
    if (it == sizes.end()) return std::nullopt;
    return it->second;
}

std::optional<bool> KnowledgeBase::compatible(std::string_view scene, std::string_view cls) const {
    auto it = compat.find(scene);
    if (it == compat.end()) return std::nullopt;
    return it->second.contains(cls);
}

KnowledgeBase KnowledgeBase::fromJson(const nlohmann::json& doc) {
    KnowledgeBase kb;
    try {
        for (const auto& [cls, dims] : doc.at("sizes").items()) {
            if (!dims.is_array() || dims.size() != 3) throw InputError("knowledge base: sizes." + cls + " must be [l, w, h]");
            kb.sizes[cls] = {dims[0].get<double>(), dims[1].get<double>(), dims[2].get<double>()};
        }
        if (doc.contains("compat")) {
            for (const auto& [scene, classes] : doc.at("compat").items()) {
                auto& entry = kb.compat[scene];
                for (const auto& c : classes) entry.insert(c.get<std::string>());
            }
        }
        if (doc.contains("novel_classes")) {
            for (const auto& c : doc.at("novel_classes")) kb.novelClasses.insert(c.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("knowledge base: ") + e.what());
    }
    kb.validate();
    return kb;
}

KnowledgeBase KnowledgeBase::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open knowledge base '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("knowledge base '" + path + "': " + e.what());
    }
    return fromJson(doc);
}

nlohmann::json KnowledgeBase::toJson() const {
    nlohmann::json doc;
    doc["sizes"] = nlohmann::json::object();
    for (const auto& [cls, p] : sizes) doc["sizes"][cls] = {p.lStd, p.wStd, p.hStd};
    doc["compat"] = nlohmann::json::object();
    for (const auto& [scene, classes] : compat) doc["compat"][scene] = classes;
    doc["novel_classes"] = novelClasses;
    return doc;
}

void SizeConstraintConfig::validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("size constraint alpha must be >= 0");
    if (!(phiSize >= 0.0 && phiSize < 1.0)) throw std::invalid_argument("size constraint phiSize must lie in [0, 1)");
}

double deltaFit(double x, double y, const SizeConstraintConfig& cfg) {
    if (!(y > 0.0)) throw std::invalid_argument("deltaFit: standard value must be positive");
    const double relErr = std::abs(x - y) / y;
    return std::exp(-cfg.alpha * std::max(0.0, relErr - cfg.phiSize));
}

double sizeConstraint(const Box7DoF& box, const SizePrior& prior, const SizeConstraintConfig& cfg) {
    return (deltaFit(box.l(), prior.lStd, cfg) + deltaFit(box.w(), prior.wStd, cfg) +
            deltaFit(box.h(), prior.hStd, cfg)) /
           3.0;
}

double confidenceConstraint(double score) {
    if (!(score >= 0.0 && score <= 1.0)) throw std::invalid_argument("confidence score outside [0,1]");
    return score;
}

double sceneConstraint(std::string_view cls, std::string_view scene, KnowledgeProvider& provider,
                       bool unknownPairCompatible) {
    const auto judged = provider.sceneCompatible(scene, cls);
    return judged.value_or(unknownPairCompatible) ? 1.0 : 0.0;
}

psl::ConstraintVector constraintVector(const Detection& det, const SceneContext& scene, KnowledgeProvider& provider,
                                       const ConstraintConfig& cfg) {
    const auto prior = provider.sizePrior(det.classId);
    if (!prior) throw MissingKnowledge(det.classId);
    return {confidenceConstraint(det.score), sizeConstraint(det.box, *prior, cfg.size),
            sceneConstraint(det.classId, scene.sceneType, provider, cfg.unknownPairCompatible)};
}

}  // namespace glrd
