#include "tiermem/embedding.hpp"
#include "tiermem/processor.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

namespace tiermem {

namespace {

using nlohmann::json;

struct SplitUrl {
    std::string base;
    std::string path;
};

Result<SplitUrl> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) return make_error(Errc::InvalidConfig, "url needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return SplitUrl{url, "/"};
    return SplitUrl{url.substr(0, slash), url.substr(slash)};
}

std::string env_or(const char* name, std::string fallback = {}) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::move(fallback);
}

struct Posted {
    int status = 0;
    std::string body;
};

// One POST with retries on transport failure and 5xx.
Result<Posted> post_json(const std::string& url, const std::string& api_key, const json& payload,
                         int timeout_seconds, int retries, int backoff_ms) {
    auto parts = split_url(url);
    if (!parts) return parts.error();
    httplib::Client cli(parts->base);
    cli.set_connection_timeout(timeout_seconds, 0);
    cli.set_read_timeout(timeout_seconds, 0);
    cli.set_write_timeout(timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    const std::string body = payload.dump(-1, ' ', false, json::error_handler_t::replace);

    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << (attempt - 1)));
        auto res = cli.Post(parts->path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        return Posted{res->status, res->body};
    }
    return make_error(Errc::ProcessorUnavailable, url + ": " + last_error);
}

}  // namespace

Result<HttpProcessorOptions> HttpProcessorOptions::from_env() {
    HttpProcessorOptions o;
    o.url = env_or("TIERMEM_PROCESSOR_URL");
    if (o.url.empty()) return make_error(Errc::InvalidConfig, "TIERMEM_PROCESSOR_URL is not set");
    o.model = env_or("TIERMEM_PROCESSOR_MODEL");
    o.api_key = env_or("TIERMEM_PROCESSOR_KEY");
    return o;
}

Result<std::string> HttpProcessor::complete(const std::string& prompt) {
    json payload = {{"model", opts_.model}, {"prompt", prompt}};
    auto posted = post_json(opts_.url, opts_.api_key, payload, opts_.timeout_seconds, opts_.retries, opts_.backoff_ms);
    if (!posted) return posted.error();
    if (posted->status != 200)
        return make_error(Errc::ProcessorUnavailable, "HTTP " + std::to_string(posted->status));
    json body = json::parse(posted->body, nullptr, false);
    if (body.is_discarded() || !body.is_object())
        return make_error(Errc::ProcessorUnavailable, "response is not a JSON object");
    if (auto it = body.find("completion"); it != body.end() && it->is_string()) return it->get<std::string>();
    if (auto it = body.find("choices"); it != body.end() && it->is_array() && !it->empty()) {
        const json& c = it->front();
        if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
            return c["message"]["content"].get<std::string>();
        if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
    }
    return make_error(Errc::ProcessorUnavailable, "response carries no completion");
}

Result<HttpEmbedderOptions> HttpEmbedderOptions::from_env() {
    HttpEmbedderOptions o;
    o.url = env_or("TIERMEM_EMBED_URL");
    if (o.url.empty()) return make_error(Errc::InvalidConfig, "TIERMEM_EMBED_URL is not set");
    o.model = env_or("TIERMEM_EMBED_MODEL");
    o.api_key = env_or("TIERMEM_EMBED_KEY");
    const std::string dim = env_or("TIERMEM_EMBED_DIM", "0");
    o.dim = static_cast<std::size_t>(std::strtoull(dim.c_str(), nullptr, 10));
    return o;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderOptions opts) : opts_(std::move(opts)) {}

Result<Vector> HttpEmbedder::embed(std::string_view text) const {
    json payload = {{"model", opts_.model}, {"input", std::string(text)}};
    auto posted = post_json(opts_.url, opts_.api_key, payload, opts_.timeout_seconds, 2, 250);
    if (!posted) return posted.error();
    if (posted->status != 200) return make_error(Errc::ProcessorUnavailable, "HTTP " + std::to_string(posted->status));
    json body = json::parse(posted->body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return make_error(Errc::ProcessorUnavailable, "bad embedding response");
    const json* arr = nullptr;
    if (body.contains("embedding")) {
        arr = &body["embedding"];
    } else if (body.contains("data") && body["data"].is_array() && !body["data"].empty() &&
               body["data"][0].contains("embedding")) {
        arr = &body["data"][0]["embedding"];
    }
    if (!arr || !arr->is_array() || arr->empty()) return make_error(Errc::ProcessorUnavailable, "no embedding in response");
    Vector v;
    v.reserve(arr->size());
    for (const auto& x : *arr) {
        if (!x.is_number()) return make_error(Errc::ProcessorUnavailable, "non-numeric embedding component");
        v.push_back(x.get<float>());
    }
    if (opts_.dim != 0 && v.size() != opts_.dim)
        return make_error(Errc::ProcessorUnavailable, "embedding has dimension " + std::to_string(v.size()));
    l2_normalize(v);
    return v;
}

}  // namespace tiermem
