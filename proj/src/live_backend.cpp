#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gosu/errors.hpp"
#include "gosu/provider.hpp"
#include "gosu/util.hpp"

namespace gosu {

using nlohmann::json;

namespace {

struct ParsedEndpoint {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // e.g. "/v1"
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("endpoint must include a scheme: " + endpoint);
    const std::size_t path = endpoint.find('/', scheme + 3);
    ParsedEndpoint out;
    if (path == std::string::npos) {
        out.origin = endpoint;
    } else {
        out.origin = endpoint.substr(0, path);
        out.path_prefix = endpoint.substr(path);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/')
            out.path_prefix.pop_back();
    }
    return out;
}

// POSTs JSON with bounded retries and jittered exponential backoff. Retries
// cover transport failures and 5xx; 4xx is a hard error.
json post_json(const LiveBackendConfig& config, const std::string& route, const json& body) {
    const ParsedEndpoint ep = parse_endpoint(config.endpoint);
    std::string api_key;
    if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;

    std::mt19937_64 jitter_rng(std::random_device{}());
    std::string last_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto base = std::chrono::milliseconds(250LL << (attempt - 1));
            const auto jitter = std::chrono::milliseconds(jitter_rng() % 250);
            std::this_thread::sleep_for(base + jitter);
        }
        httplib::Client client(ep.origin);
        client.set_connection_timeout(config.timeout_seconds);
        client.set_read_timeout(config.timeout_seconds);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = client.Post(ep.path_prefix + route, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendUnavailableError("backend rejected request (" +
                                          std::to_string(res->status) + "): " + res->body);
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            last_error = std::string("bad JSON from backend: ") + e.what();
        }
    }
    throw BackendUnavailableError("backend unreachable after " +
                                  std::to_string(config.max_retries + 1) + " attempts (" +
                                  last_error + ")");
}

}  // namespace

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {
    parse_endpoint(config_.endpoint);  // validate eagerly
}

CompletionResult LiveBackend::complete(const CompletionRequest& request) {
    json body{{"model", config_.model},
              {"messages", json::array({json{{"role", "user"}, {"content", render_prompt(request)}}})},
              {"max_tokens", request.max_output_tokens},
              {"temperature", 0.0}};
    json reply = post_json(config_, "/chat/completions", body);

    const json& choice = reply.at("choices").at(0);
    if (choice.value("finish_reason", "") == "length")
        throw OutputTruncatedError("completion stopped at the output-token ceiling");

    CompletionResult result;
    result.text = choice.at("message").at("content").get<std::string>();
    if (reply.contains("usage")) {
        result.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
        result.completion_tokens = reply["usage"].value("completion_tokens", 0L);
    }
    return result;
}

std::vector<std::vector<float>> LiveBackend::embed(const std::vector<std::string>& texts) {
    json body{{"model", config_.embed_model}, {"input", texts}};
    json reply = post_json(config_, "/embeddings", body);

    std::vector<std::vector<float>> out(texts.size());
    for (const json& item : reply.at("data")) {
        const std::size_t index = item.at("index").get<std::size_t>();
        if (index >= out.size()) throw Error("backend returned out-of-range embedding index");
        out[index] = item.at("embedding").get<std::vector<float>>();
        if (static_cast<int>(out[index].size()) != config_.dimension)
            throw DimensionMismatchError(
                "backend embedding dimension " + std::to_string(out[index].size()) +
                " != configured " + std::to_string(config_.dimension));
    }
    return out;
}

}  // namespace gosu
