#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "glrd/balancers.hpp"
#include "glrd/llm.hpp"
#include "glrd/pipeline.hpp"

namespace glrd {

struct PathConfig {
    std::string detections;
    std::string kb;
    std::string gt;
    std::string out;
    std::string log;
    std::string labels;     // pseudo-label records for `balance`
    std::string losses;     // loss stream for `dbc-sim`
    std::string proposals;  // proposal document for `baol`
};

struct SbcConfig {
    double initialThreshold = 0.5;
    double deltaPhi = 0.05;
    double dBound = 0.5;
    double phiLo = 0.1;
    double phiHi = 0.9;
    int maxIters = 50;
};

struct DbcConfig {
    int interval = 2000;
    int k = 5;
    double deltaW = 0.05;
    double wLo = 0.5;
    double wHi = 1.5;
};

struct BaolConfig {
    std::size_t nPro = 1200;
    std::size_t kPro = 1000;
    double iouLo = 0.25;
    double iouHi = 0.85;
    double lambda = 1.0;
};

enum class LlmMode { Off, Remote };

struct LlmConfig {
    LlmMode mode = LlmMode::Off;
    llm::HttpClientConfig http;  // endpoint and key come from the environment
};

struct SyntheticConfig {
    std::size_t scenes = 200;
    CorruptionParams corruption;
};

struct RunConfig {
    PathConfig paths;
    RefineConfig refine;
    double phiClip = 0.5;
    SbcConfig sbc;
    DbcConfig dbc;
    BaolConfig baol;
    LlmConfig llm;
    SyntheticConfig synthetic;
    std::size_t workers = 0;  // 0: one per logical core
    std::uint64_t seed = 7;

    /// Throws InputError naming the first out-of-range value.
    void validate() const;

    balance::SbcState sbcState(const std::vector<std::string>& classes) const;
    balance::DbcState dbcState(const std::vector<std::string>& classes) const;

    /// Overlays the keys present in `doc` on `base`. Unknown keys are errors.
    static RunConfig fromJson(const nlohmann::json& doc, RunConfig base);
    static RunConfig fromJson(const nlohmann::json& doc);
    static RunConfig load(const std::string& path);
    nlohmann::json toJson() const;
};

}  // namespace glrd
