#include "glrd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <iomanip>
#include <sstream>
#include <thread>

#include "glrd/errors.hpp"

namespace glrd {

void validate(const Detection& det) {
    if (!(det.score >= 0.0 && det.score <= 1.0)) throw InputError("detection score outside [0,1]");
    if (det.classId.empty()) throw InputError("detection without class");
    if (det.classScores) {
        for (const auto& [cls, s] : *det.classScores) {
            if (!(s >= 0.0 && s <= 1.0)) throw InputError("class score for '" + cls + "' outside [0,1]");
        }
    }
}

void validate(const SceneRecord& rec) {
    if (rec.context.sceneType.empty()) throw InputError("scene '" + rec.sceneId + "' has no scene type");
    for (const auto& d : rec.detections) validate(d);
}

std::vector<std::string> debateCandidates(const Detection& det, int count) {
    if (!det.classScores || det.classScores->empty()) return {det.classId};
    std::vector<std::pair<std::string, double>> ranked(det.classScores->begin(), det.classScores->end());
    // Map order is by name, so a stable sort leaves equal scores name-ordered.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < count; ++i) out.push_back(ranked[i].first);
    return out;
}

namespace {

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

double classScoreOf(const Detection& det, const std::string& cls) {
    if (det.classScores) {
        auto it = det.classScores->find(cls);
        if (it != det.classScores->end()) return it->second;
    }
    return cls == det.classId ? det.score : 0.0;
}

struct Argument {
    double sizeFit = 0.0;
    double sceneFit = 0.0;
    double classScore = 0.0;
    double strength() const { return sizeFit * sceneFit * classScore; }
};

Argument offlineArgument(const Detection& det, const std::string& cls, const SceneContext& scene,
                         KnowledgeProvider& provider, const RefineConfig& cfg) {
    Argument a;
    if (auto prior = provider.sizePrior(cls)) a.sizeFit = sizeConstraint(det.box, *prior, cfg.constraints.size);
    a.sceneFit = sceneConstraint(cls, scene.sceneType, provider, cfg.constraints.unknownPairCompatible);
    a.classScore = classScoreOf(det, cls);
    return a;
}

std::string offlineJudge(const std::vector<std::string>& candidates, const std::map<std::string, Argument>& args) {
    std::string best = candidates.front();
    for (const auto& c : candidates) {
        const Argument& a = args.at(c);
        const Argument& b = args.at(best);
        if (a.strength() != b.strength()) {
            if (a.strength() > b.strength()) best = c;
        } else if (a.classScore != b.classScore) {
            if (a.classScore > b.classScore) best = c;
        } else if (c < best) {
            best = c;
        }
    }
    return best;
}

std::string lowered(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Earliest candidate named in the reply; the longer name wins at equal offsets.
std::optional<std::string> candidateNamedIn(const std::string& reply, const std::vector<std::string>& candidates) {
    const std::string text = lowered(reply);
    std::optional<std::pair<std::size_t, std::string>> found;
    for (const auto& c : candidates) {
        const auto pos = text.find(lowered(c));
        if (pos == std::string::npos) continue;
        if (!found || pos < found->first || (pos == found->first && c.size() > found->second.size())) {
            found = {pos, c};
        }
    }
    if (!found) return std::nullopt;
    return found->second;
}

std::string boxSize(const Box7DoF& b) { return fixed(b.l(), 2) + "*" + fixed(b.w(), 2) + "*" + fixed(b.h(), 2); }

std::string debaterPrompt(const std::string& cls, const Detection& det, const SceneContext& scene) {
    std::string p = "You are a debater. The scene is a " + scene.sceneType + ".";
    if (!scene.description.empty()) p += " " + scene.description;
    p += " A detected object measures " + boxSize(det.box) +
         " (length*width*height, meters). Argue that this object is a " + cls +
         ", using its size and whether a " + cls + " is normal in a " + scene.sceneType + ".";
    return p;
}

std::string judgePrompt(const std::vector<std::string>& candidates, const std::vector<Utterance>& arguments,
                        const SceneContext& scene) {
    std::string p = "You are the judge of a debate about an object detected in a " + scene.sceneType +
                    ". The candidate classes are:";
    for (std::size_t i = 0; i < candidates.size(); ++i) p += (i ? ", " : " ") + candidates[i];
    p += ".\n";
    for (const auto& a : arguments) p += "[" + a.role + "] " + a.text + "\n";
    p += "Summarize the debate and answer with the winning class name.";
    return p;
}

}  // namespace

DebateOutcome debate(const Detection& det, const SceneContext& scene, KnowledgeProvider& provider,
                     const RefineConfig& cfg, llm::LlmClient* remote) {
    DebateOutcome out;
    out.candidates = debateCandidates(det, cfg.debateCandidates);

    std::map<std::string, Argument> args;
    for (const auto& c : out.candidates) {
        args[c] = offlineArgument(det, c, scene, provider, cfg);
        out.perCandidateScore[c] = args[c].strength();
    }

    if (remote) {
        const int maxTokens = 256;
        for (const auto& c : out.candidates) {
            out.transcript.push_back({"debater:" + c, remote->complete(debaterPrompt(c, det, scene), maxTokens)});
        }
        const std::string verdict = remote->complete(judgePrompt(out.candidates, out.transcript, scene), maxTokens);
        out.transcript.push_back({"judge", verdict});
        if (auto named = candidateNamedIn(verdict, out.candidates)) {
            out.winner = *named;
            return out;
        }
        out.remoteFallback = true;
        out.winner = offlineJudge(out.candidates, args);
        out.transcript.push_back({"judge", "no candidate named; offline verdict: " + out.winner});
        return out;
    }

    for (const auto& c : out.candidates) {
        const Argument& a = args[c];
        out.transcript.push_back({"debater:" + c, "size fit " + fixed(a.sizeFit) + ", scene fit " + fixed(a.sceneFit, 0) +
                                                      ", class score " + fixed(a.classScore) + ", strength " +
                                                      fixed(a.strength())});
    }
    out.winner = offlineJudge(out.candidates, args);
    out.transcript.push_back({"judge", "winner " + out.winner + " with strength " + fixed(args[out.winner].strength())});
    return out;
}

RefineResult refineScene(const SceneRecord& rec, KnowledgeProvider& provider, const RefineConfig& cfg,
                         llm::LlmClient* remote) {
    RefineResult res;
    res.log.sceneId = rec.sceneId;
    res.refined.sceneId = rec.sceneId;
    res.refined.context = rec.context;
    try {
        validate(rec);
        for (std::size_t i = 0; i < rec.detections.size(); ++i) {
            const Detection& det = rec.detections[i];
            if (!provider.isNovel(det.classId)) {
                res.refined.detections.push_back(det);
                ++res.log.passedThrough;
                continue;
            }
            ObjectLog entry;
            entry.index = i;
            entry.originalClass = det.classId;
            entry.constraints = constraintVector(det, rec.context, provider, cfg.constraints);
            entry.solution = psl::solve(psl::buildGlrdRules(entry.constraints, cfg.weights), cfg.policy);
            entry.decision = psl::decide(entry.solution, cfg.thresholds);
            entry.finalClass = det.classId;

            if (entry.decision == psl::Decision::Reclassify) {
                DebateOutcome outcome = debate(det, rec.context, provider, cfg, remote);
                entry.transcript = std::move(outcome.transcript);
                entry.finalClass = outcome.winner;
            }
            if (entry.decision != psl::Decision::Remove) {
                Detection kept = det;
                kept.classId = entry.finalClass;
                res.refined.detections.push_back(std::move(kept));
            }
            res.log.objects.push_back(std::move(entry));
        }
    } catch (const ProviderError& e) {
        res.log.errorKind = SceneErrorKind::Provider;
        res.log.error = e.what();
    } catch (const InputError& e) {
        res.log.errorKind = SceneErrorKind::Input;
        res.log.error = e.what();
    } catch (const std::invalid_argument& e) {
        res.log.errorKind = SceneErrorKind::Input;
        res.log.error = e.what();
    }
    if (res.log.errorKind != SceneErrorKind::None) {
        res.refined = rec;
        res.log.objects.clear();
        res.log.passedThrough = 0;
    }
    return res;
}

std::vector<RefineResult> refineScenes(std::span<const SceneRecord> recs, KnowledgeProvider& provider,
                                       const RefineConfig& cfg, std::size_t workers, llm::LlmClient* remote) {
    std::vector<RefineResult> results(recs.size());
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, recs.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < recs.size(); ++i) results[i] = refineScene(recs[i], provider, cfg, remote);
        return results;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < recs.size(); i = next++) {
                    results[i] = refineScene(recs[i], provider, cfg, remote);
                }
            });
        }
    }
    return results;
}

RefinementSummary summarize(std::span<const RefineResult> results) {
    RefinementSummary s;
    for (const auto& r : results) {
        if (r.log.errorKind != SceneErrorKind::None) {
            ++s.failedScenes;
            continue;
        }
        s.passedThrough += r.log.passedThrough;
        for (const auto& o : r.log.objects) {
            switch (o.decision) {
                case psl::Decision::Keep:
                    ++s.kept;
                    break;
                case psl::Decision::Remove:
                    ++s.removed;
                    break;
                case psl::Decision::Reclassify:
                    ++s.reclassified;
                    break;
            }
        }
    }
    return s;
}

}  // namespace glrd
