#pragma once

#include <chrono>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "glrd/commonsense.hpp"

namespace glrd::llm {

// Prompt templates sent verbatim to the language model.
inline constexpr std::string_view kScenePrompt = "What kind of scene is it mostly like? Describe the scene.";
std::string sizePrompt(std::string_view cls);
std::string scenePrompt(std::string_view cls, std::string_view scene);

/// First `a*b*c` triple in the reply, converted to meters. Units may follow
/// each number or the whole triple (m, cm, mm); no unit means meters.
std::optional<SizePrior> parseSizeReply(std::string_view reply);

/// true / false for replies that open with yes / no; nullopt otherwise.
std::optional<bool> parseYesNo(std::string_view reply);

/// Scene type = first of `knownScenes` mentioned in the reply.
std::optional<SceneContext> parseSceneReply(std::string_view reply, const std::vector<std::string>& knownScenes);

/// Text-completion backend.
class LlmClient {
  public:
    virtual ~LlmClient() = default;
    /// Throws ProviderError when no answer could be obtained.
    virtual std::string complete(const std::string& prompt, int maxTokens) = 0;
};

struct HttpClientConfig {
    std::string endpoint;  // e.g. http://localhost:8080/v1/complete
    std::string apiKey;
    std::chrono::milliseconds timeout{30000};
    int maxRetries = 3;
    std::chrono::milliseconds initialBackoff{200};
    int maxInFlight = 4;
    int maxTokens = 64;

    /// Reads GLRD_LLM_ENDPOINT and GLRD_LLM_KEY.
    static HttpClientConfig fromEnvironment();
};

/// POSTs {"prompt", "max_tokens"} and reads "text" from the JSON reply.
/// Transport errors, 429 and 5xx are retried with exponential backoff.
class HttpLlmClient final : public LlmClient {
  public:
    explicit HttpLlmClient(HttpClientConfig cfg);
    std::string complete(const std::string& prompt, int maxTokens) override;

  private:
    HttpClientConfig cfg_;
    std::string base_;
    std::string path_;
    std::counting_semaphore<> inFlight_;
};

/// Knowledge provider backed by a language model, with per-run caches and a
/// knowledge-base fallback for failed or unusable replies.
class RemoteKnowledgeProvider final : public KnowledgeProvider {
  public:
    RemoteKnowledgeProvider(LlmClient& client, std::optional<KnowledgeBase> fallback, int maxTokens = 64);

    std::optional<SizePrior> sizePrior(std::string_view cls) override;
    std::optional<bool> sceneCompatible(std::string_view scene, std::string_view cls) override;
    bool isNovel(std::string_view cls) const override;

    LlmClient& client() { return client_; }
    int maxTokens() const { return maxTokens_; }

  private:
    template <typename T>
    using Cache = std::map<std::string, std::shared_future<T>, std::less<>>;

    template <typename T, typename Fn>
    T cached(Cache<T>& cache, const std::string& key, Fn&& compute);

    std::optional<SizePrior> querySize(const std::string& cls);
    std::optional<bool> queryScene(const std::string& scene, const std::string& cls);

    LlmClient& client_;
    std::optional<KnowledgeBase> fallback_;
    int maxTokens_;
    std::mutex mutex_;
    Cache<std::optional<SizePrior>> sizeCache_;
    Cache<std::optional<bool>> sceneCache_;
};

/// Size query with knowledge-base fallback on an unusable reply or transport
/// failure. Throws ProviderError when neither source answers.
SizePrior llmQuerySize(std::string_view cls, LlmClient& client, const KnowledgeBase* fallback = nullptr,
                       int maxTokens = 64);

/// Scene query with knowledge-base fallback on an ambiguous reply or
/// transport failure. Throws ProviderError when neither source answers.
bool llmQueryScene(std::string_view cls, std::string_view scene, LlmClient& client,
                   const KnowledgeBase* fallback = nullptr, int maxTokens = 64);

}  // namespace glrd::llm
