#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glrd/geometry.hpp"

namespace glrd {

struct SceneContext {
    std::string sceneType;
    std::string description;

    bool operator==(const SceneContext&) const = default;
};

using ClassScores = std::map<std::string, double>;

struct Detection {
    Box7DoF box;
    std::string classId;
    double score = 1.0;
    std::optional<ClassScores> classScores;

    bool operator==(const Detection&) const = default;
};

struct SceneRecord {
    std::string sceneId;
    SceneContext context;
    std::vector<Detection> detections;

    bool operator==(const SceneRecord&) const = default;
};

/// Throws InputError when a score leaves [0,1] or the scene type
/// is empty.
void validate(const Detection& det);
void validate(const SceneRecord& rec);

}  // namespace glrd
