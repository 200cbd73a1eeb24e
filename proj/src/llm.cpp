#include "glrd/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "glrd/errors.hpp"

namespace glrd::llm {

std::string sizePrompt(std::string_view cls) {
    return "What is the common size of a " + std::string(cls) +
           "? Answer in the format of length*width*height.";
}

std::string scenePrompt(std::string_view cls, std::string_view scene) {
    return "Is it normal to see a " + std::string(cls) + " in a " + std::string(scene) + "?";
}

namespace {

double unitScale(const std::string& unit) {
    std::string u;
    for (char c : unit) u.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (u.rfind("mm", 0) == 0 || u.rfind("milli", 0) == 0) return 1e-3;
    if (u.rfind("cm", 0) == 0 || u.rfind("centi", 0) == 0) return 1e-2;
    return 1.0;
}

std::string lowered(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::optional<SizePrior> parseSizeReply(std::string_view reply) {
    static const std::string num = R"((\d+(?:\.\d+)?|\.\d+))";
    static const std::string unit =
        R"((?:\s*(millimet(?:er|re)s?|centimet(?:er|re)s?|met(?:er|re)s?|mm|cm|m)\b)?)";
    static const std::string sep = R"(\s*[*xX]\s*)";
    static const std::regex triple(num + unit + sep + num + unit + sep + num + unit, std::regex::icase);

    const std::string text(reply);
    std::smatch m;
    if (!std::regex_search(text, m, triple)) return std::nullopt;

    // A single trailing unit applies to all three numbers.
    const std::string trailing = m[6].str();
    double dims[3];
    for (int i = 0; i < 3; ++i) {
        const std::string own = m[2 * i + 2].str();
        const double scale = unitScale(own.empty() ? trailing : own);
        dims[i] = std::stod(m[2 * i + 1].str()) * scale;
    }
    SizePrior prior{dims[0], dims[1], dims[2]};
    if (!(prior.lStd > 0.0 && prior.wStd > 0.0 && prior.hStd > 0.0)) return std::nullopt;
    return prior;
}

std::optional<bool> parseYesNo(std::string_view reply) {
    std::size_t i = 0;
    while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i]))) ++i;
    std::size_t j = i;
    while (j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]))) ++j;
    const std::string word = lowered(reply.substr(i, j - i));
    if (word == "yes" || word == "yeah" || word == "yep") return true;
    if (word == "no" || word == "nope" || word == "not") return false;
    return std::nullopt;
}

std::optional<SceneContext> parseSceneReply(std::string_view reply, const std::vector<std::string>& knownScenes) {
    const std::string text = lowered(reply);
    std::optional<std::pair<std::size_t, std::string>> first;
    for (const auto& scene : knownScenes) {
        const auto pos = text.find(lowered(scene));
        if (pos == std::string::npos) continue;
        if (!first || pos < first->first || (pos == first->first && scene.size() > first->second.size())) {
            first = {pos, scene};
        }
    }
    if (!first) return std::nullopt;
    return SceneContext{first->second, std::string(reply)};
}

HttpClientConfig HttpClientConfig::fromEnvironment() {
    HttpClientConfig cfg;
    if (const char* e = std::getenv("GLRD_LLM_ENDPOINT")) cfg.endpoint = e;
    if (const char* k = std::getenv("GLRD_LLM_KEY")) cfg.apiKey = k;
    return cfg;
}

HttpLlmClient::HttpLlmClient(HttpClientConfig cfg)
    : cfg_(std::move(cfg)), inFlight_(std::max(1, cfg_.maxInFlight)) {
    const auto scheme = cfg_.endpoint.find("://");
    if (cfg_.endpoint.empty() || scheme == std::string::npos) {
        throw InputError("LLM endpoint must be an absolute http:// URL (set GLRD_LLM_ENDPOINT)");
    }
    const auto slash = cfg_.endpoint.find('/', scheme + 3);
    base_ = cfg_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
}

std::string HttpLlmClient::complete(const std::string& prompt, int maxTokens) {
    inFlight_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{inFlight_};

    httplib::Client http(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    http.set_connection_timeout(secs.count(), usecs.count());
    http.set_read_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!cfg_.apiKey.empty()) headers.emplace("Authorization", "Bearer " + cfg_.apiKey);

    const std::string body = nlohmann::json{{"prompt", prompt}, {"max_tokens", maxTokens}}.dump();
    auto backoff = cfg_.initialBackoff;
    std::string lastError;
    for (int attempt = 0; attempt <= cfg_.maxRetries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = http.Post(path_, headers, body, "application/json");
        if (!res) {
            lastError = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            lastError = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw ProviderError("LLM endpoint returned HTTP " + std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body).at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed LLM response: ") + e.what());
        }
    }
    throw ProviderError("LLM request failed after " + std::to_string(cfg_.maxRetries + 1) + " attempts: " + lastError);
}

SizePrior llmQuerySize(std::string_view cls, LlmClient& client, const KnowledgeBase* fallback, int maxTokens) {
    std::string reason;
    try {
        if (auto prior = parseSizeReply(client.complete(sizePrompt(cls), maxTokens))) return *prior;
        reason = "unparseable size reply";
    } catch (const ProviderError& e) {
        reason = e.what();
    }
    if (fallback) {
        if (auto prior = fallback->sizeOf(cls)) return *prior;
    }
    throw ProviderError("size of '" + std::string(cls) + "': " + reason);
}

bool llmQueryScene(std::string_view cls, std::string_view scene, LlmClient& client, const KnowledgeBase* fallback,
                   int maxTokens) {
    std::string reason;
    try {
        if (auto yes = parseYesNo(client.complete(scenePrompt(cls, scene), maxTokens))) return *yes;
        reason = "ambiguous scene reply";
    } catch (const ProviderError& e) {
        reason = e.what();
    }
    if (fallback) {
        if (auto judged = fallback->compatible(scene, cls)) return *judged;
    }
    throw ProviderError("scene check '" + std::string(cls) + "' in '" + std::string(scene) + "': " + reason);
}

RemoteKnowledgeProvider::RemoteKnowledgeProvider(LlmClient& client, std::optional<KnowledgeBase> fallback,
                                                 int maxTokens)
    : client_(client), fallback_(std::move(fallback)), maxTokens_(maxTokens) {}

template <typename T, typename Fn>
T RemoteKnowledgeProvider::cached(Cache<T>& cache, const std::string& key, Fn&& compute) {
    std::promise<T> promise;
    std::shared_future<T> future;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = cache.find(key);
        if (it == cache.end()) {
            future = promise.get_future().share();
            cache.emplace(key, future);
            owner = true;
        } else {
            future = it->second;
        }
    }
    if (owner) {
        try {
            promise.set_value(compute());
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    }
    return future.get();
}

std::optional<SizePrior> RemoteKnowledgeProvider::querySize(const std::string& cls) {
    return llmQuerySize(cls, client_, fallback_ ? &*fallback_ : nullptr, maxTokens_);
}

std::optional<bool> RemoteKnowledgeProvider::queryScene(const std::string& scene, const std::string& cls) {
    return llmQueryScene(cls, scene, client_, fallback_ ? &*fallback_ : nullptr, maxTokens_);
}

std::optional<SizePrior> RemoteKnowledgeProvider::sizePrior(std::string_view cls) {
    const std::string key(cls);
    return cached(sizeCache_, key, [&] { return querySize(key); });
}

std::optional<bool> RemoteKnowledgeProvider::sceneCompatible(std::string_view scene, std::string_view cls) {
    const std::string s(scene);
    const std::string c(cls);
    return cached(sceneCache_, s + '\n' + c, [&] { return queryScene(s, c); });
}

bool RemoteKnowledgeProvider::isNovel(std::string_view cls) const {
    return fallback_ && fallback_->isNovel(cls);
}

}  // namespace glrd::llm
