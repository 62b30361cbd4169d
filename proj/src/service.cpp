#include "gosu/service.hpp"

#include <mutex>
#include <thread>

#include "gosu/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gosu {

using nlohmann::json;

struct QueryService::Impl {
    httplib::Server server;
    std::thread worker;
    std::mutex mu;
    std::shared_ptr<Engine> engine;

    std::shared_ptr<Engine> snapshot() {
        std::lock_guard<std::mutex> lock(mu);
        return engine;
    }
};

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void reply_not_loaded(httplib::Response& res) {
    reply_json(res, 503, json{{"error", "engine not loaded yet"}});
}

// Pulls {question, flags} out of the request body; throws ConfigError with a
// client-facing message on any shape problem.
std::pair<std::string, LayerFlags> parse_query_body(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("body is not valid JSON: ") + ex.what());
    }
    if (!doc.is_object()) throw ConfigError("body must be a JSON object");
    if (!doc.contains("question") || !doc["question"].is_string()) {
        throw ConfigError("body needs a string field \"question\"");
    }
    LayerFlags flags;
    if (doc.contains("flags")) {
        const json& raw = doc["flags"];
        if (!raw.is_object()) throw ConfigError("\"flags\" must be an object");
        for (const auto& [key, value] : raw.items()) {
            if (!value.is_boolean()) throw ConfigError("flag \"" + key + "\" must be a boolean");
            if (key == "entity") flags.entity_layer = value.get<bool>();
            else if (key == "relation") flags.relation_layer = value.get<bool>();
            else if (key == "semantic") flags.su_layer = value.get<bool>();
            else throw ConfigError("unknown flag \"" + key + "\"");
        }
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "question" && key != "flags") {
            throw ConfigError("unknown field \"" + key + "\"");
        }
    }
    return {doc["question"].get<std::string>(), flags};
}

json query_response(const QueryResult& result) {
    json body;
    body["answer"] = result.answer;
    json stats;
    for (const auto& [key, value] : result.context_stats) stats[key] = value;
    body["context_stats"] = stats;
    json usage;
    usage["prompt_tokens"] = result.usage.prompt_tokens;
    usage["completion_tokens"] = result.usage.completion_tokens;
    usage["embedding_tokens"] = result.usage.embedding_tokens;
    usage["usd"] = result.usage.usd_cost;
    body["usage"] = usage;
    return body;
}

}  // namespace

QueryService::QueryService() : impl_(std::make_unique<Impl>()) {
    Impl* impl = impl_.get();

    impl->server.Get("/healthz", [impl](const httplib::Request&, httplib::Response& res) {
        if (!impl->snapshot()) {
            res.status = 503;
            res.set_content("loading\n", "text/plain");
        } else {
            res.set_content("ok\n", "text/plain");
        }
    });

    impl->server.Get("/stats", [impl](const httplib::Request&, httplib::Response& res) {
        auto engine = impl->snapshot();
        if (!engine) return reply_not_loaded(res);
        res.set_content(engine->stats_json(), "application/json");
    });

    impl->server.Post("/query", [impl](const httplib::Request& req, httplib::Response& res) {
        auto engine = impl->snapshot();
        if (!engine) return reply_not_loaded(res);
        try {
            const auto [question, flags] = parse_query_body(req.body);
            reply_json(res, 200, query_response(engine->query(question, flags)));
        } catch (const ConfigError& ex) {
            reply_json(res, 422, json{{"error", ex.what()}});
        } catch (const NoContextError& ex) {
            reply_json(res, 200, json{{"no_context", true}, {"detail", ex.what()}});
        } catch (const std::exception& ex) {
            reply_json(res, 500, json{{"error", ex.what()}});
        }
    });
}

QueryService::~QueryService() { stop(); }

void QueryService::attach(std::shared_ptr<Engine> engine) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->engine = std::move(engine);
}

bool QueryService::listen(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

int QueryService::start_background(const std::string& host) {
    const int port = impl_->server.bind_to_any_port(host);
    if (port < 0) return -1;
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void QueryService::stop() {
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace gosu
