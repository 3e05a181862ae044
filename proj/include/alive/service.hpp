#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>

#include "alive/config.hpp"
#include "alive/enrichment.hpp"
#include "alive/registry.hpp"

namespace httplib {
class Server;
}

namespace alive {

/// Outcome of one nightly batch run.
struct RefreshSummary {
    int refreshed = 0;
    int failed = 0;
};

/// HTTP facade over the registry and the enrichment pipeline. Every JSON
/// response carries `"schema": "alive.v1"`; timestamps are UTC ISO-8601.
/// Responses are a pure function of store + cache state.
///
/// Mutating endpoints require `Authorization: Bearer <token>` when the
/// config sets a token. In nightly refresh mode, request handling serves
/// living data from the cache only — provider calls happen exclusively in
/// the background batch.
class Service {
public:
    explicit Service(ServiceConfig config, Clock clock = system_clock());
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Registry& registry() { return *registry_; }
    Enricher& enricher() { return *enricher_; }
    const ServiceConfig& config() const { return config_; }

    /// Re-enriches every cache entry older than the configured TTL at
    /// `now`. A failed refetch keeps the previous value (with its original
    /// fetched_at) and counts as failed.
    RefreshSummary run_nightly_refresh(Instant now);

    /// Binds to an ephemeral port on the configured address and returns it
    /// (test harness entry point). Serve with listen_async().
    int bind_any_port();
    /// Starts serving on a background thread after a successful bind.
    void listen_async();
    /// Blocking serve on the configured address and port. Starts the
    /// nightly scheduler when that mode is configured.
    bool listen();
    void stop();

private:
    void install_routes();
    void start_scheduler();
    EnrichPolicy request_policy() const;
    bool authorized(const std::string& header) const;

    ServiceConfig config_;
    Clock clock_;
    std::unique_ptr<Registry> registry_;
    std::unique_ptr<Enricher> enricher_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listen_thread_;

    std::mutex scheduler_mu_;
    std::condition_variable scheduler_cv_;
    bool stopping_ = false;
    std::thread scheduler_;
};

}  // namespace alive
