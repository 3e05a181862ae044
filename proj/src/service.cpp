#include "alive/service.hpp"

#include <chrono>
#include <sstream>

#include <httplib.h>

#include "alive/api_json.hpp"
#include "alive/error.hpp"
#include "alive/json_io.hpp"
#include "alive/renderer.hpp"

namespace alive {

namespace {

constexpr const char* kJsonMime = "application/json";

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument:
        case ErrorCode::parse_error: return 400;
        case ErrorCode::not_found_publication:
        case ErrorCode::not_found_version:
        case ErrorCode::not_found_record:
        case ErrorCode::not_found_backlink: return 404;
        case ErrorCode::rate_limited: return 429;
        case ErrorCode::invalid_state: return 409;
        case ErrorCode::storage_failure:
        case ErrorCode::corruption: return 500;
        case ErrorCode::provider_failure:
        case ErrorCode::remote_failure: return 502;
    }
    return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", kJsonMime);
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error,
                    std::string("request body is not valid JSON: ") + e.what());
    }
}

ResolvePolicy policy_param(const httplib::Request& req) {
    if (!req.has_param("policy")) return ResolvePolicy::latest_any;
    auto policy = resolve_policy_from_string(req.get_param_value("policy"));
    if (!policy)
        throw Error(ErrorCode::invalid_argument,
                    "unknown policy \"" + req.get_param_value("policy") +
                        "\" (want latest_any or latest_official)");
    return *policy;
}

RefStyle style_param(const httplib::Request& req) {
    if (!req.has_param("style")) return RefStyle::harvard;
    auto style = style_from_string(req.get_param_value("style"));
    if (!style)
        throw Error(ErrorCode::invalid_argument,
                    "unknown style \"" + req.get_param_value("style") +
                        "\" (want harvard or vancouver)");
    return *style;
}

std::vector<EnrichKind> kinds_param(const httplib::Request& req) {
    if (!req.has_param("kinds")) return all_enrich_kinds();
    std::vector<EnrichKind> kinds;
    std::istringstream in(req.get_param_value("kinds"));
    std::string token;
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        auto kind = enrich_kind_from_string(token);
        if (!kind)
            throw Error(ErrorCode::invalid_argument, "unknown enrichment kind \"" + token + "\"");
        kinds.push_back(*kind);
    }
    if (kinds.empty()) throw Error(ErrorCode::invalid_argument, "kinds parameter selects nothing");
    return kinds;
}

}  // namespace

Service::Service(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
    Registry::Options reg_opts;
    reg_opts.clock = clock_;
    reg_opts.promotion = config_.promotion;
    registry_ = std::make_unique<Registry>(config_.store_path, reg_opts);

    Enricher::Options enr_opts;
    enr_opts.clock = clock_;
    enr_opts.registry = registry_.get();
    enr_opts.cache_store = &registry_->store();
    enr_opts.link_fetcher = http_hop_fetcher(std::chrono::milliseconds(2000));
    enricher_ = std::make_unique<Enricher>(enr_opts);
    for (const auto& spec : config_.providers) enricher_->add_provider(make_http_provider(spec));

    server_ = std::make_unique<httplib::Server>();
    install_routes();
}

Service::~Service() { stop(); }

EnrichPolicy Service::request_policy() const {
    EnrichPolicy policy;
    // Nightly mode promises zero outbound calls on the request path: serve
    // whatever the batch left in the cache, and nothing else.
    policy.freshness = config_.refresh.mode == RefreshPolicy::Mode::nightly
                           ? Freshness::cache_only
                           : Freshness::on_the_fly;
    policy.ttl = std::chrono::hours(config_.refresh.ttl_hours);
    policy.review_window_days = config_.review_window_days;
    return policy;
}

bool Service::authorized(const std::string& header) const {
    if (config_.auth_token.empty()) return true;
    return header == "Bearer " + config_.auth_token;
}

void Service::install_routes() {
    using httplib::Request;
    using httplib::Response;

    auto guard = [this](auto fn) {
        return [this, fn](const Request& req, Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                if (e.retry_after()) {
                    long long wait_secs =
                        (e.retry_after()->serial() - clock_().date().serial()) * 86400LL;
                    if (wait_secs < 0) wait_secs = 0;
                    res.set_header("Retry-After", std::to_string(wait_secs));
                }
                send_json(res, status_for(e.code()), api::error_response(e));
            } catch (const std::exception& e) {
                json body = api::envelope();
                body["error"] = json{{"code", "internal"}, {"message", e.what()}};
                send_json(res, 500, body);
            }
        };
    };
    auto mutating = [this, guard](auto fn) {
        return guard([this, fn](const Request& req, Response& res) {
            if (!authorized(req.get_header_value("Authorization"))) {
                json body = api::envelope();
                body["error"] = json{{"code", "unauthorized"},
                                     {"message", "missing or wrong bearer token"}};
                send_json(res, 401, body);
                return;
            }
            fn(req, res);
        });
    };

    server_->Get(R"(/resolve/(.+))", guard([this](const Request& req, Response& res) {
        const ResolvePolicy policy = policy_param(req);
        const RevisionRecord rec = registry_->resolve(req.matches[1].str(), policy);
        registry_->record_visit(rec.pub);
        const json body = api::resolve_response(*registry_, rec, policy);
        if (body.value("outdated", false)) res.set_header("X-Alive-Outdated", "true");
        send_json(res, body.value("retracted", false) ? 410 : 200, body);
    }));

    server_->Get(R"(/ref/(.+))", guard([this](const Request& req, Response& res) {
        const PublicationId id(req.matches[1].str());
        EnrichPolicy policy = request_policy();
        policy.kinds = kinds_param(req);
        const json body =
            api::reference_response(*registry_, *enricher_, id, style_param(req), policy);
        send_json(res, body.value("retracted", false) ? 410 : 200, body);
    }));

    server_->Get(R"(/history/(.+))", guard([this](const Request& req, Response& res) {
        send_json(res, 200,
                  api::history_response(*registry_, PublicationId(req.matches[1].str())));
    }));

    server_->Get(R"(/check-updates/(.+))", guard([this](const Request& req, Response& res) {
        send_json(res, 200,
                  api::check_updates_response(*registry_, req.matches[1].str(),
                                              policy_param(req)));
    }));

    server_->Get(R"(/cited-by/(.+))", guard([this](const Request& req, Response& res) {
        send_json(res, 200,
                  api::cited_by_response(*registry_, PublicationId(req.matches[1].str()),
                                         style_param(req)));
    }));

    server_->Post(R"(/publications/(.+)/revisions)",
                  mutating([this](const Request& req, Response& res) {
        const PublicationId id(req.matches[1].str());
        const json in = parse_body(req.body);
        if (!in.is_object() || !in.contains("body") || !in.at("body").is_string())
            throw Error(ErrorCode::invalid_argument, "request needs a string \"body\" field");
        Track track = Track::author;
        if (in.contains("track")) {
            auto parsed = track_from_string(in.at("track").get<std::string>());
            if (!parsed)
                throw Error(ErrorCode::invalid_argument,
                            "unknown track \"" + in.at("track").get<std::string>() + "\"");
            track = *parsed;
        }
        const RevisionRecord rec = registry_->publish_revision(
            id, in.at("body").get<std::string>(), in.value("note", std::string()), track);
        if (in.contains("meta")) {
            const MetaAttributes attrs = in.at("meta").get<MetaAttributes>();
            registry_->update_meta(id, attrs);
        }
        send_json(res, 201, api::revision_response(rec));
    }));

    server_->Post(R"(/publications/(.+)/promote)",
                  mutating([this](const Request& req, Response& res) {
        const PublicationId id(req.matches[1].str());
        const json in = parse_body(req.body);
        if (!in.is_object() || !in.contains("version") || !in.at("version").is_number_unsigned())
            throw Error(ErrorCode::invalid_argument,
                        "request needs an unsigned \"version\" field");
        const RevisionRecord rec = registry_->promote(id, in.at("version").get<std::uint32_t>());
        send_json(res, 200, api::revision_response(rec));
    }));

    server_->Post(R"(/publications/(.+)/retract)",
                  mutating([this](const Request& req, Response& res) {
        const PublicationId id(req.matches[1].str());
        const json in = parse_body(req.body);
        registry_->retract(id, in.is_object() ? in.value("reason", std::string()) : std::string());
        send_json(res, 200, api::retract_response(id));
    }));

    server_->Post("/backlinks", mutating([this](const Request& req, Response& res) {
        const json in = parse_body(req.body);
        if (!in.is_object() || !in.contains("citing_doc") || !in.contains("target") ||
            !in.contains("recorded_revision_date"))
            throw Error(ErrorCode::invalid_argument,
                        "request needs citing_doc, target and recorded_revision_date");
        const auto date = parse_date(in.at("recorded_revision_date").get<std::string>());
        if (!date)
            throw Error(ErrorCode::invalid_argument, "recorded_revision_date must be YYYY-MM-DD");
        const Backlink link = registry_->register_backlink(
            in.at("citing_doc").get<std::string>(),
            PublicationId(in.at("target").get<std::string>()), *date);
        send_json(res, 201, api::backlink_response(link, /*created=*/true));
    }));

    server_->Post("/backlinks/ack", mutating([this](const Request& req, Response& res) {
        const json in = parse_body(req.body);
        if (!in.is_object() || !in.contains("citing_doc") || !in.contains("target"))
            throw Error(ErrorCode::invalid_argument, "request needs citing_doc and target");
        const Backlink link = registry_->acknowledge(
            in.at("citing_doc").get<std::string>(),
            PublicationId(in.at("target").get<std::string>()), clock_());
        send_json(res, 200, api::backlink_response(link, /*created=*/false));
    }));

    server_->Get(R"(/notifications/(.+))", mutating([this](const Request& req, Response& res) {
        const std::string citing = req.matches[1].str();
        send_json(res, 200,
                  api::notifications_response(citing, registry_->drain_notifications(citing)));
    }));

    server_->Post(R"(/click/([^/]+)/(.+))", guard([this](const Request& req, Response& res) {
        const std::string list = req.matches[1].str();
        const PublicationId id(req.matches[2].str());
        registry_->record_click(list, id);
        send_json(res, 200, api::click_response(list, id, registry_->click_count(list, id)));
    }));

    server_->set_error_handler([](const Request&, Response& res) {
        if (!res.body.empty()) return;  // a handler already wrote its error
        json body = api::envelope();
        body["error"] = json{{"code", "not_found"}, {"message", "no such endpoint"}};
        res.set_content(body.dump(2) + "\n", kJsonMime);
    });
    server_->set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
        json body = api::envelope();
        std::string message = "unhandled exception";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        body["error"] = json{{"code", "internal"}, {"message", message}};
        send_json(res, 500, body);
    });
}

RefreshSummary Service::run_nightly_refresh(Instant now) {
    RefreshSummary summary;
    const long long ttl_secs = 3600LL * config_.refresh.ttl_hours;
    for (const auto& info : enricher_->cache_entries()) {
        if (now.secs - info.stored_at.secs <= ttl_secs) continue;  // still fresh
        if (enricher_->refresh_cache_entry(info))
            ++summary.refreshed;
        else
            ++summary.failed;
    }
    return summary;
}

int Service::bind_any_port() {
    const int port = server_->bind_to_any_port(config_.bind_address);
    if (port <= 0)
        throw Error(ErrorCode::remote_failure, "cannot bind to " + config_.bind_address);
    return port;
}

void Service::listen_async() {
    listen_thread_ = std::thread([this] { server_->listen_after_bind(); });
    for (int i = 0; i < 1000 && !server_->is_running(); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

bool Service::listen() {
    start_scheduler();
    return server_->listen(config_.bind_address, config_.port);
}

void Service::start_scheduler() {
    if (config_.refresh.mode != RefreshPolicy::Mode::nightly) return;
    scheduler_ = std::thread([this] {
        std::unique_lock lk(scheduler_mu_);
        while (!stopping_) {
            const Instant now = clock_();
            const long long of_day = ((now.secs % 86400) + 86400) % 86400;
            long long wait = config_.refresh.nightly_at_minutes * 60LL - of_day;
            if (wait <= 0) wait += 86400;
            scheduler_cv_.wait_for(lk, std::chrono::seconds(wait), [this] { return stopping_; });
            if (stopping_) break;
            lk.unlock();
            try {
                run_nightly_refresh(clock_());
            } catch (const std::exception&) {
                // A failed batch must never take the server down; the next
                // run retries everything still stale.
            }
            lk.lock();
        }
    });
}

void Service::stop() {
    {
        std::lock_guard lk(scheduler_mu_);
        stopping_ = true;
    }
    scheduler_cv_.notify_all();
    if (scheduler_.joinable()) scheduler_.join();
    if (server_) server_->stop();
    if (listen_thread_.joinable()) listen_thread_.join();
    {
        std::lock_guard lk(scheduler_mu_);
        stopping_ = false;  // allow a later listen() on the same object
    }
}

}  // namespace alive
