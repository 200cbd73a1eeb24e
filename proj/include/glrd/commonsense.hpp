#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "glrd/detection.hpp"
#include "glrd/psl.hpp"

namespace glrd {

/// Standard extents of a class, in meters.
struct SizePrior {
    double lStd = 0.0;
    double wStd = 0.0;
    double hStd = 0.0;

    void validate() const;
    bool operator==(const SizePrior&) const = default;
};

/// Offline stand-in for the language model's common sense.
///
/// `compat` lists, per known scene type, every class that is plausible there;
/// a class missing from a known scene's list is implausible. Scene types
/// absent from `compat` are unknown.
struct KnowledgeBase {
    std::map<std::string, SizePrior, std::less<>> sizes;
    std::map<std::string, std::set<std::string, std::less<>>, std::less<>> compat;
    std::set<std::string, std::less<>> novelClasses;

    void validate() const;
    bool isNovel(std::string_view cls) const { return novelClasses.contains(cls); }
    std::optional<SizePrior> sizeOf(std::string_view cls) const;
    std::optional<bool> compatible(std::string_view scene, std::string_view cls) const;

    static KnowledgeBase fromJson(const nlohmann::json& doc);
    static KnowledgeBase load(const std::string& path);
    nlohmann::json toJson() const;
};

struct SizeConstraintConfig {
    double alpha = 0.25;
    double phiSize = 0.05;

    void validate() const;
};

/// exp(-alpha * max(0, |x - y| / y - phiSize)); `y` is the standard value.
double deltaFit(double x, double y, const SizeConstraintConfig& cfg = {});

/// Mean of the three per-axis fits of the box extents against the prior.
double sizeConstraint(const Box7DoF& box, const SizePrior& prior, const SizeConstraintConfig& cfg = {});

double confidenceConstraint(double score);

/// Source of size priors and scene plausibility judgements. Implementations
/// must be safe to call from several threads.
class KnowledgeProvider {
  public:
    virtual ~KnowledgeProvider() = default;

    virtual std::optional<SizePrior> sizePrior(std::string_view cls) = 0;
    /// std::nullopt when the provider cannot judge the pair.
    virtual std::optional<bool> sceneCompatible(std::string_view scene, std::string_view cls) = 0;
    virtual bool isNovel(std::string_view cls) const = 0;
};

class KnowledgeBaseProvider final : public KnowledgeProvider {
  public:
    explicit KnowledgeBaseProvider(KnowledgeBase kb) : kb_(std::move(kb)) {}

    std::optional<SizePrior> sizePrior(std::string_view cls) override { return kb_.sizeOf(cls); }
    std::optional<bool> sceneCompatible(std::string_view scene, std::string_view cls) override {
        return kb_.compatible(scene, cls);
    }
    bool isNovel(std::string_view cls) const override { return kb_.isNovel(cls); }
    const KnowledgeBase& knowledgeBase() const { return kb_; }

  private:
    KnowledgeBase kb_;
};

struct ConstraintConfig {
    SizeConstraintConfig size;
    /// Scene constraint for pairs the provider cannot judge.
    bool unknownPairCompatible = true;
};

/// 1 when the provider judges the class plausible in the scene, else 0.
double sceneConstraint(std::string_view cls, std::string_view scene, KnowledgeProvider& provider,
                       bool unknownPairCompatible = true);

/// Assembles (xConf, xSize, xScene). Throws MissingKnowledge when the class
/// has no size prior.
psl::ConstraintVector constraintVector(const Detection& det, const SceneContext& scene, KnowledgeProvider& provider,
                                       const ConstraintConfig& cfg = {});

}  // namespace glrd
