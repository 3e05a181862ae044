// alive — command-line front end for the publication registry. Works
// against a local store directly or, with --remote, against a running
// service; --json swaps the human output for the service's JSON shapes.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "alive/api_json.hpp"
#include "alive/config.hpp"
#include "alive/enrichment.hpp"
#include "alive/error.hpp"
#include "alive/json_io.hpp"
#include "alive/meta_marker.hpp"
#include "alive/registry.hpp"
#include "alive/renderer.hpp"
#include "alive/service.hpp"

namespace {

using alive::json;

struct Options {
    std::optional<std::string> store;
    std::optional<std::string> remote;
    std::optional<std::string> config_path;
    std::string token;
    bool json_out = false;

    bool config_loaded = false;
    alive::ServiceConfig config;
};

alive::ServiceConfig& config_of(Options& o) {
    if (!o.config_loaded) {
        o.config = alive::discover_config(o.config_path);
        o.config_loaded = true;
    }
    return o.config;
}

std::string store_path(Options& o) {
    return o.store ? *o.store : config_of(o).store_path;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw alive::Error(alive::ErrorCode::storage_failure, "cannot open file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- local mode ------------------------------------------------------------

struct Local {
    std::unique_ptr<alive::Registry> registry;
    std::unique_ptr<alive::Enricher> enricher;
};

Local make_local(Options& o) {
    alive::Registry::Options ropts;
    ropts.promotion = config_of(o).promotion;
    Local local;
    local.registry = std::make_unique<alive::Registry>(store_path(o), ropts);
    alive::Enricher::Options eopts;
    eopts.registry = local.registry.get();
    eopts.cache_store = &local.registry->store();
    eopts.link_fetcher = alive::http_hop_fetcher(std::chrono::milliseconds(2000));
    local.enricher = std::make_unique<alive::Enricher>(eopts);
    for (const auto& spec : config_of(o).providers)
        local.enricher->add_provider(alive::make_http_provider(spec));
    return local;
}

// --- remote mode -------------------------------------------------------------

alive::ErrorCode code_from_string(const std::string& text) {
    using EC = alive::ErrorCode;
    for (EC c : {EC::invalid_argument, EC::parse_error, EC::not_found_publication,
                 EC::not_found_version, EC::not_found_record, EC::not_found_backlink,
                 EC::rate_limited, EC::invalid_state, EC::storage_failure, EC::corruption,
                 EC::provider_failure, EC::remote_failure})
        if (text == alive::to_string(c)) return c;
    return EC::remote_failure;
}

json check_response(const httplib::Result& res, const std::string& what) {
    if (!res)
        throw alive::Error(alive::ErrorCode::remote_failure,
                           "no response from the service for " + what);
    json body = json::object();
    try {
        body = json::parse(res->body);
    } catch (const json::exception&) {
    }
    // 410 carries a full retracted-with-notice payload, not an error.
    if (res->status >= 400 && res->status != 410) {
        std::string code = "remote_failure";
        std::string message = "service answered HTTP " + std::to_string(res->status);
        if (body.contains("error") && body["error"].is_object()) {
            code = body["error"].value("code", code);
            message = body["error"].value("message", message);
        }
        throw alive::Error(code_from_string(code), message);
    }
    return body;
}

json remote_get(Options& o, const std::string& path) {
    httplib::Client client(*o.remote);
    client.set_read_timeout(10, 0);
    return check_response(client.Get(path), path);
}

json remote_post(Options& o, const std::string& path, const json& payload) {
    httplib::Client client(*o.remote);
    client.set_read_timeout(10, 0);
    httplib::Headers headers;
    if (!o.token.empty()) headers.emplace("Authorization", "Bearer " + o.token);
    return check_response(client.Post(path, headers, payload.dump(), "application/json"), path);
}

json remote_get_auth(Options& o, const std::string& path) {
    httplib::Client client(*o.remote);
    client.set_read_timeout(10, 0);
    httplib::Headers headers;
    if (!o.token.empty()) headers.emplace("Authorization", "Bearer " + o.token);
    return check_response(client.Get(path, headers), path);
}

std::string enc(const std::string& raw) { return alive::encode_component(raw); }

// --- output ------------------------------------------------------------------

void emit(Options& o, const json& body, const std::function<void(const json&)>& human) {
    if (o.json_out) {
        std::cout << body.dump(2) << "\n";
        return;
    }
    human(body);
}

void print_revision_line(const json& b) {
    std::cout << b.value("name", "") << "  " << b.value("timestamp", "") << "  track="
              << b.value("track", "") << "  " << b.value("content_hash", "");
    if (!b.value("note", std::string()).empty()) std::cout << "  note=" << b["note"].get<std::string>();
    std::cout << "\n";
}

void print_resolve(const json& b) {
    print_revision_line(b);
    if (b.contains("url")) std::cout << "url: " << b["url"].get<std::string>() << "\n";
    if (b.value("outdated", false))
        std::cout << "note: a newer version exists (v" << b.value("latest_version", 0u) << ")\n";
    if (b.value("retracted", false))
        std::cout << "notice: " << b.value("notice", "this publication has been retracted")
                  << "\n";
}

// --- commands ----------------------------------------------------------------

void cmd_publish(Options& o, const std::string& id, const std::string& file,
                 const std::string& note, const std::string& track) {
    const std::string bytes = read_file(file);
    alive::ExtractedMeta extracted = alive::extract_meta(bytes);
    // The ledger owns the last-revision date; a stale value in the
    // document's own block must not override it.
    extracted.attrs.last_revision_date.reset();

    json body;
    if (o.remote) {
        json payload{{"body", bytes}, {"note", note}, {"track", track}};
        if (extracted.block_found) payload["meta"] = json(extracted.attrs);
        body = remote_post(o, "/publications/" + enc(id) + "/revisions", payload);
    } else {
        Local local = make_local(o);
        const alive::PublicationId pub(id);
        const auto rec = local.registry->publish_revision(
            pub, bytes, note, *alive::track_from_string(track));
        if (extracted.block_found) local.registry->update_meta(pub, extracted.attrs);
        body = alive::api::revision_response(rec);
    }
    emit(o, body, [](const json& b) {
        std::cout << "published ";
        print_revision_line(b);
    });
}

void cmd_resolve(Options& o, const std::string& name, bool official) {
    const alive::ResolvePolicy policy =
        official ? alive::ResolvePolicy::latest_official : alive::ResolvePolicy::latest_any;
    json body;
    if (o.remote) {
        body = remote_get(o, "/resolve/" + enc(name) +
                                 "?policy=" + std::string(alive::to_string(policy)));
    } else {
        Local local = make_local(o);
        const auto rec = local.registry->resolve(name, policy);
        body = alive::api::resolve_response(*local.registry, rec, policy);
    }
    emit(o, body, print_resolve);
}

void cmd_history(Options& o, const std::string& id) {
    json body;
    if (o.remote) {
        body = remote_get(o, "/history/" + enc(id));
    } else {
        Local local = make_local(o);
        body = alive::api::history_response(*local.registry, alive::PublicationId(id));
    }
    emit(o, body, [](const json& b) {
        for (const auto& e : b.at("entries")) {
            std::cout << e.value("kind", "") << "  v" << e.value("version", 0u) << "  "
                      << e.value("timestamp", "") << "  track=" << e.value("track", "");
            if (!e.value("note", std::string()).empty())
                std::cout << "  " << e["note"].get<std::string>();
            std::cout << "\n";
        }
    });
}

void cmd_check_updates(Options& o, const std::string& name, bool official) {
    const alive::ResolvePolicy policy =
        official ? alive::ResolvePolicy::latest_official : alive::ResolvePolicy::latest_any;
    json body;
    if (o.remote) {
        body = remote_get(o, "/check-updates/" + enc(name) +
                                 "?policy=" + std::string(alive::to_string(policy)));
    } else {
        Local local = make_local(o);
        body = alive::api::check_updates_response(*local.registry, name, policy);
    }
    emit(o, body, [](const json& b) {
        if (b.value("newer_exists", false))
            std::cout << "newer version available: " << b.value("latest", "") << " ("
                      << b.value("latest_timestamp", "") << ")\n";
        else
            std::cout << "up to date: " << b.value("latest", "") << "\n";
        if (b.value("retracted", false)) std::cout << "notice: this publication is retracted\n";
    });
}

void cmd_promote(Options& o, const std::string& id, std::uint32_t version) {
    json body;
    if (o.remote) {
        body = remote_post(o, "/publications/" + enc(id) + "/promote",
                           json{{"version", version}});
    } else {
        Local local = make_local(o);
        body = alive::api::revision_response(
            local.registry->promote(alive::PublicationId(id), version));
    }
    emit(o, body, [](const json& b) {
        std::cout << "promoted to official track: ";
        print_revision_line(b);
    });
}

void cmd_retract(Options& o, const std::string& id, const std::string& reason) {
    json body;
    if (o.remote) {
        body = remote_post(o, "/publications/" + enc(id) + "/retract",
                           json{{"reason", reason}});
    } else {
        Local local = make_local(o);
        local.registry->retract(alive::PublicationId(id), reason);
        body = alive::api::retract_response(alive::PublicationId(id));
    }
    emit(o, body,
         [](const json& b) { std::cout << "retracted " << b.value("id", "") << "\n"; });
}

void cmd_render(Options& o, const std::string& id, const std::string& style,
                const std::vector<std::string>& kinds, bool markup) {
    json body;
    if (o.remote) {
        std::string path = "/ref/" + enc(id) + "?style=" + style;
        if (!kinds.empty()) {
            path += "&kinds=";
            for (std::size_t i = 0; i < kinds.size(); ++i)
                path += (i ? "," : "") + kinds[i];
        }
        body = remote_get(o, path);
    } else {
        Local local = make_local(o);
        alive::EnrichPolicy policy;
        policy.ttl = std::chrono::hours(config_of(o).refresh.ttl_hours);
        policy.review_window_days = config_of(o).review_window_days;
        if (!kinds.empty()) {
            policy.kinds.clear();
            for (const auto& k : kinds) policy.kinds.push_back(*alive::enrich_kind_from_string(k));
        }
        body = alive::api::reference_response(*local.registry, *local.enricher,
                                              alive::PublicationId(id),
                                              *alive::style_from_string(style), policy);
    }
    emit(o, body, [markup](const json& b) {
        std::cout << b.value(markup ? "markup_fragment" : "plain_text", "") << "\n";
        if (b.value("retracted", false) && b.contains("notice"))
            std::cout << "notice: " << b["notice"].get<std::string>() << "\n";
    });
}

void cmd_refresh(Options& o, const std::string& doc_path) {
    const std::string doc = read_file(doc_path);
    alive::LedgerDateReader reader;
    std::optional<Local> local;
    if (o.remote) {
        reader = [&o](const alive::PublicationId& id) -> std::optional<alive::Date> {
            try {
                const json r = remote_get(o, "/resolve/" + enc(id.value()));
                const auto at = alive::parse_instant(r.value("timestamp", ""));
                if (!at) return std::nullopt;
                return at->date();
            } catch (const alive::Error&) {
                return std::nullopt;
            }
        };
    } else {
        local.emplace(make_local(o));
        reader = [&local](const alive::PublicationId& id) -> std::optional<alive::Date> {
            try {
                return local->registry->meta(id).last_revision_date;
            } catch (const alive::Error&) {
                return std::nullopt;
            }
        };
    }

    const alive::RefreshOutcome outcome = alive::refresh_document(doc, reader);
    if (outcome.changed > 0) alive::atomic_write_file(doc_path, outcome.text);

    json body = alive::api::envelope();
    body["path"] = doc_path;
    body["changed"] = outcome.changed;
    body["unresolved"] = outcome.unresolved;
    body["warnings"] = outcome.warnings;
    emit(o, body, [](const json& b) {
        const int changed = b.value("changed", 0);
        if (changed > 0)
            std::cout << "refreshed " << changed << " marker(s) in "
                      << b.value("path", "") << "\n";
        else
            std::cout << "document is up to date\n";
        for (const auto& u : b.at("unresolved"))
            std::cerr << "unresolved: " << u.get<std::string>() << "\n";
        for (const auto& w : b.at("warnings"))
            std::cerr << "warning: " << w.get<std::string>() << "\n";
    });
}

std::vector<std::string> harvest_urls(const std::string& doc) {
    std::vector<std::string> urls;
    static const std::string_view kStops = " \t\r\n\"'<>()[]{}";
    for (std::size_t pos = 0; pos < doc.size();) {
        const std::size_t http = doc.find("http", pos);
        if (http == std::string::npos) break;
        const bool https = doc.compare(http, 8, "https://") == 0;
        const bool plain = doc.compare(http, 7, "http://") == 0;
        if (!https && !plain) {
            pos = http + 4;
            continue;
        }
        std::size_t end = http;
        while (end < doc.size() && kStops.find(doc[end]) == std::string_view::npos) ++end;
        std::string url = doc.substr(http, end - http);
        while (!url.empty() && (url.back() == '.' || url.back() == ',' || url.back() == ';'))
            url.pop_back();
        if (std::find(urls.begin(), urls.end(), url) == urls.end()) urls.push_back(url);
        pos = end;
    }
    return urls;
}

void cmd_check_links(Options& o, const std::string& doc_path) {
    const std::string doc = read_file(doc_path);
    const auto fetch = alive::http_hop_fetcher(std::chrono::milliseconds(2000));

    json links = json::array();
    for (const auto& url : harvest_urls(doc)) {
        json row{{"url", url}};
        if (!alive::plausible_url(url)) {
            row["state"] = "invalid";
        } else {
            const alive::LinkStatus status = alive::check_link(url, fetch);
            row["state"] = alive::to_string(status.state);
            if (status.http_code) row["http_code"] = *status.http_code;
            if (status.final_url) row["final_url"] = *status.final_url;
        }
        links.push_back(row);
    }
    json body = alive::api::envelope();
    body["path"] = doc_path;
    body["links"] = links;
    emit(o, body, [](const json& b) {
        for (const auto& row : b.at("links")) {
            std::ostringstream line;
            line << row.value("state", "");
            if (row.contains("http_code")) line << " (" << row["http_code"].get<int>() << ")";
            std::cout << line.str() << "  " << row.value("url", "");
            if (row.contains("final_url"))
                std::cout << "  -> " << row["final_url"].get<std::string>();
            std::cout << "\n";
        }
        if (b.at("links").empty()) std::cout << "no URLs found\n";
    });
}

void cmd_notify(Options& o, const std::string& citing_doc) {
    json body;
    if (o.remote) {
        body = remote_get_auth(o, "/notifications/" + enc(citing_doc));
    } else {
        Local local = make_local(o);
        body = alive::api::notifications_response(citing_doc,
                                                  local.registry->drain_notifications(citing_doc));
    }
    emit(o, body, [](const json& b) {
        const auto& items = b.at("notifications");
        if (items.empty()) {
            std::cout << "no notifications\n";
            return;
        }
        for (const auto& n : items)
            std::cout << n.value("target", "") << " revised to v" << n.value("new_version", 0u)
                      << " on " << n.value("new_date", "") << " (reference possibly outdated)\n";
    });
}

void cmd_serve(Options& o) {
    alive::ServiceConfig cfg = config_of(o);
    if (o.store) cfg.store_path = *o.store;
    alive::Service service(cfg);
    std::cout << "alive service listening on " << cfg.bind_address << ":" << cfg.port
              << " (store: " << cfg.store_path << ", refresh: "
              << alive::to_string(cfg.refresh.mode) << ")\n";
    if (!service.listen())
        throw alive::Error(alive::ErrorCode::remote_failure,
                           "cannot listen on " + cfg.bind_address + ":" +
                               std::to_string(cfg.port));
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"alive — registry and toolkit for alive publications"};
    app.require_subcommand(1);
    app.add_option("--store", o.store, "store directory (default: config store_path)");
    app.add_option("--remote", o.remote, "service base URL, e.g. http://127.0.0.1:8080");
    app.add_option("--config", o.config_path, "config file (JSON)");
    app.add_option("--token", o.token, "bearer token for mutating remote calls");
    app.add_flag("--json", o.json_out, "machine-readable output");

    const auto kind_names = [] {
        std::vector<std::string> names;
        for (alive::EnrichKind k : alive::all_enrich_kinds()) names.push_back(alive::to_string(k));
        return names;
    }();

    // publish
    std::string pub_id, pub_file, pub_note, pub_track = "author";
    auto* publish = app.add_subcommand("publish", "append a revision from a file");
    publish->add_option("id", pub_id, "publication id")->required();
    publish->add_option("file", pub_file, "body document")->required();
    publish->add_option("--note", pub_note, "revision note");
    publish->add_option("--track", pub_track, "author|official")
        ->check(CLI::IsMember({"author", "official"}));
    publish->callback([&] { cmd_publish(o, pub_id, pub_file, pub_note, pub_track); });

    // resolve
    std::string res_name;
    bool res_official = false;
    auto* resolve = app.add_subcommand("resolve", "resolve a name to a revision");
    resolve->add_option("name", res_name, "<base> or <base>v<i>")->required();
    resolve->add_flag("--official", res_official, "latest official instead of latest");
    resolve->callback([&] { cmd_resolve(o, res_name, res_official); });

    // history
    std::string hist_id;
    auto* history = app.add_subcommand("history", "protocol of changes");
    history->add_option("id", hist_id, "publication id")->required();
    history->callback([&] { cmd_history(o, hist_id); });

    // check-updates
    std::string chk_name;
    bool chk_official = false;
    auto* check = app.add_subcommand("check-updates", "is a newer version available?");
    check->add_option("name", chk_name, "<base> or <base>v<i>")->required();
    check->add_flag("--official", chk_official, "compare against the official track");
    check->callback([&] { cmd_check_updates(o, chk_name, chk_official); });

    // promote
    std::string promote_id;
    std::uint32_t promote_version = 0;
    auto* promote = app.add_subcommand("promote", "move a revision to the official track");
    promote->add_option("id", promote_id, "publication id")->required();
    promote->add_option("version", promote_version, "version number")->required();
    promote->callback([&] { cmd_promote(o, promote_id, promote_version); });

    // retract
    std::string retract_id, retract_reason;
    auto* retract = app.add_subcommand("retract", "flag a publication as retracted");
    retract->add_option("id", retract_id, "publication id")->required();
    retract->add_option("--reason", retract_reason, "reason shown in the notice");
    retract->callback([&] { cmd_retract(o, retract_id, retract_reason); });

    // render
    std::string render_id, render_style = "harvard";
    std::vector<std::string> render_kinds;
    bool render_markup = false;
    auto* render = app.add_subcommand("render", "render a living reference");
    render->add_option("id", render_id, "publication id")->required();
    render->add_option("--style", render_style, "harvard|vancouver")
        ->check(CLI::IsMember({"harvard", "vancouver"}));
    render->add_option("--kinds", render_kinds, "enrichment kinds (comma-separated)")
        ->delimiter(',')
        ->check(CLI::IsMember(kind_names));
    render->add_flag("--markup", render_markup, "print the markup fragment");
    render->callback([&] { cmd_render(o, render_id, render_style, render_kinds, render_markup); });

    // refresh
    std::string refresh_doc;
    auto* refresh = app.add_subcommand("refresh", "rewrite living-date markers in a document");
    refresh->add_option("doc", refresh_doc, "document file")->required();
    refresh->callback([&] { cmd_refresh(o, refresh_doc); });

    // check-links
    std::string links_doc;
    auto* check_links = app.add_subcommand("check-links", "probe every URL in a document");
    check_links->add_option("doc", links_doc, "document file")->required();
    check_links->callback([&] { cmd_check_links(o, links_doc); });

    // notify
    std::string notify_doc;
    auto* notify = app.add_subcommand("notify", "drain a citing document's notifications");
    notify->add_option("citing-doc", notify_doc, "citing document id")->required();
    notify->callback([&] { cmd_notify(o, notify_doc); });

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    serve->callback([&] { cmd_serve(o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const alive::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
