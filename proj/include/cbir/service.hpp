#pragma once

#include "cbir/index.hpp"

#include <memory>
#include <string>

namespace cbir {

struct ServiceConfig {
    /// Root that relative record paths resolve against.
    std::string images_dir = ".";
    /// Optional directory served at "/" (web UI assets).
    std::string static_dir;
    std::string cors_origin = "*";
    std::size_t default_k = 20;
    std::size_t max_k = 100;
    unsigned eval_workers = 1;
};

/// HTTP API over an immutable index.
///
///   GET  /api/health
///   GET  /api/classes
///   GET  /api/images?class=C&page=N&per=M        (page is 0-based)
///   GET  /api/images/{id}/thumbnail
///   POST /api/query                              (JSON {id, k, exclude_self} or multipart "image")
///   GET  /api/eval/summary?k=K
class Service {
public:
    Service(RetrievalIndex index, ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Returns the
    /// bound port or -1 on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called. Requires a successful bind().
    bool run();
    void stop();
    void wait_until_ready() const;

    const RetrievalIndex& index() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cbir
