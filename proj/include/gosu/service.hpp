#pragma once

#include <memory>
#include <string>

#include "gosu/engine.hpp"

namespace gosu {

// HTTP front end over one immutable engine snapshot.
//
//   POST /query   {"question": "...", "flags": {"entity": true, ...}}
//                 -> {"answer", "context_stats", "usage"} on success,
//                    {"no_context": true, "detail": ...} when retrieval
//                    found nothing, 422 on a malformed body
//   GET  /stats   -> build manifest + this process's usage + query counter
//   GET  /healthz -> 200 "ok" once an engine is attached, 503 before
//
// Every route answers 503 until attach() has been called, so the service can
// bind its port before the (slow) engine load finishes.
class QueryService {
public:
    QueryService();
    ~QueryService();

    QueryService(const QueryService&) = delete;
    QueryService& operator=(const QueryService&) = delete;

    void attach(std::shared_ptr<Engine> engine);

    // Blocks, serving until stop() is called from another thread.
    bool listen(const std::string& host, int port);

    // Binds an OS-chosen port and serves on a background thread; returns the
    // port, or -1 when binding failed. Used by tests.
    int start_background(const std::string& host);

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace gosu
