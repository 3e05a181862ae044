#include "alive/enrichment.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <thread>

#include <httplib.h>

namespace alive {

namespace {

constexpr const char* kNsCache = "enrich_cache";

using steady = std::chrono::steady_clock;
using std::chrono::milliseconds;

}  // namespace

const char* to_string(EnrichKind kind) {
    switch (kind) {
        case EnrichKind::link_status: return "link_status";
        case EnrichKind::discovered_link: return "discovered_link";
        case EnrichKind::retraction: return "retraction";
        case EnrichKind::open_access: return "open_access";
        case EnrichKind::citation_count: return "citation_count";
        case EnrichKind::visit_counts: return "visit_counts";
        case EnrichKind::click_count: return "click_count";
        case EnrichKind::bookmark_count: return "bookmark_count";
        case EnrichKind::translations: return "translations";
        case EnrichKind::recent_review: return "recent_review";
    }
    return "link_status";
}

std::optional<EnrichKind> enrich_kind_from_string(std::string_view text) {
    for (EnrichKind k : all_enrich_kinds())
        if (text == to_string(k)) return k;
    return std::nullopt;
}

const std::vector<EnrichKind>& all_enrich_kinds() {
    static const std::vector<EnrichKind> kinds = {
        EnrichKind::link_status,    EnrichKind::discovered_link, EnrichKind::retraction,
        EnrichKind::open_access,    EnrichKind::citation_count,  EnrichKind::visit_counts,
        EnrichKind::click_count,    EnrichKind::bookmark_count,  EnrichKind::translations,
        EnrichKind::recent_review,
    };
    return kinds;
}

const char* to_string(LinkState state) {
    switch (state) {
        case LinkState::ok: return "ok";
        case LinkState::redirect: return "redirect";
        case LinkState::broken: return "broken";
        case LinkState::timeout: return "timeout";
    }
    return "broken";
}

const char* to_string(AccessState state) {
    switch (state) {
        case AccessState::open: return "open";
        case AccessState::embargoed: return "embargoed";
        case AccessState::closed: return "closed";
        case AccessState::unknown: return "unknown";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Link checking

bool plausible_url(std::string_view url) {
    std::string_view rest;
    if (url.starts_with("http://"))
        rest = url.substr(7);
    else if (url.starts_with("https://"))
        rest = url.substr(8);
    else
        return false;
    if (rest.empty() || rest[0] == '/' || rest[0] == ':') return false;
    for (char c : url)
        if (static_cast<unsigned char>(c) <= 0x20 || c == '\x7f') return false;
    return true;
}

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // /path?query ("/" when empty)
};

std::optional<SplitUrl> split_url(const std::string& url) {
    if (!plausible_url(url)) return std::nullopt;
    const std::size_t scheme_end = url.find("://") + 3;
    const std::size_t slash = url.find('/', scheme_end);
    SplitUrl s;
    if (slash == std::string::npos) {
        s.origin = url;
        s.path = "/";
    } else {
        s.origin = url.substr(0, slash);
        s.path = url.substr(slash);
    }
    return s;
}

std::string resolve_location(const std::string& base, const std::string& location) {
    if (location.starts_with("http://") || location.starts_with("https://")) return location;
    auto s = split_url(base);
    if (!s) return location;
    if (!location.empty() && location[0] == '/') return s->origin + location;
    return s->origin + "/" + location;
}

}  // namespace

LinkStatus check_link(const std::string& url, const HopFetcher& fetch,
                      const LinkCheckOptions& options) {
    if (!plausible_url(url))
        throw Error(ErrorCode::invalid_argument, "not a fetchable URL: \"" + url + "\"");
    if (!fetch) throw Error(ErrorCode::invalid_argument, "no hop fetcher configured");

    LinkStatus status;
    milliseconds spent{0};
    std::vector<std::string> visited = {url};
    std::string current = url;

    for (int hop = 0;; ++hop) {
        const HopResult r = fetch(current);
        spent += r.elapsed;
        if (r.status > 0) status.http_code = r.status;

        if (r.timed_out || spent > options.budget) {
            status.state = LinkState::timeout;
            return status;
        }
        if (r.transport_error) {
            status.state = LinkState::broken;
            return status;
        }
        if (r.status >= 200 && r.status < 300) {
            if (hop == 0) {
                status.state = LinkState::ok;
            } else {
                status.state = LinkState::redirect;
                status.final_url = current;
            }
            return status;
        }
        if (r.status >= 300 && r.status < 400 && r.location) {
            const std::string next = resolve_location(current, *r.location);
            const bool looped =
                std::find(visited.begin(), visited.end(), next) != visited.end();
            if (looped || hop + 1 >= options.max_hops) {
                status.state = LinkState::broken;
                return status;
            }
            visited.push_back(next);
            current = next;
            continue;
        }
        // 4xx/5xx, or a redirect with nowhere to go.
        status.state = LinkState::broken;
        return status;
    }
}

HopFetcher http_hop_fetcher(milliseconds per_hop_timeout) {
    return [per_hop_timeout](const std::string& url) -> HopResult {
        HopResult out;
        const auto t0 = steady::now();
        auto done = [&] {
            out.elapsed =
                std::chrono::duration_cast<milliseconds>(steady::now() - t0);
            return out;
        };
        auto s = split_url(url);
        if (!s || url.starts_with("https://")) {
            // No TLS in this build; https targets are reported as transport
            // failures rather than guessed at.
            out.transport_error = true;
            return done();
        }
        httplib::Client client(s->origin);
        client.set_follow_location(false);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(per_hop_timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
            per_hop_timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());

        auto res = client.Get(s->path);
        if (!res) {
            out.transport_error = true;
            out.timed_out = steady::now() - t0 >= per_hop_timeout;
            return done();
        }
        out.status = res->status;
        if (res->has_header("Location")) out.location = res->get_header_value("Location");
        return done();
    };
}

// ---------------------------------------------------------------------------
// Entry serialization

json entry_to_json(const EnrichmentEntry& e) {
    json j;
    j["kind"] = to_string(e.kind);
    j["source"] = e.source;
    j["fetched_at"] = e.fetched_at.str();
    if (e.link) {
        json l{{"state", to_string(e.link->state)}};
        if (e.link->final_url) l["final_url"] = *e.link->final_url;
        if (e.link->http_code) l["http_code"] = *e.link->http_code;
        j["link"] = l;
    }
    if (e.url) j["url"] = *e.url;
    if (e.flag) j["flag"] = *e.flag;
    if (e.access) {
        json a{{"mode", to_string(e.access->mode)},
               {"checked_at", e.access->checked_at.str()}};
        if (e.access->embargo_until) a["embargo_until"] = e.access->embargo_until->str();
        j["access"] = a;
    }
    if (!e.citations.empty()) {
        json c = json::array();
        for (const auto& cc : e.citations)
            c.push_back(json{{"source", cc.source}, {"count", cc.count}});
        j["citations"] = c;
    }
    if (e.visits)
        j["visits"] = json{{"total", e.visits->total}, {"last_30_days", e.visits->last_30_days}};
    if (e.count) j["count"] = *e.count;
    if (!e.related.empty()) {
        json r = json::array();
        for (const auto& id : e.related) r.push_back(id.value());
        j["related"] = r;
    }
    return j;
}

EnrichmentEntry entry_from_json(const json& j) {
    EnrichmentEntry e;
    auto kind = enrich_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::parse_error, "bad enrichment entry kind");
    e.kind = *kind;
    e.source = j.value("source", std::string());
    auto fetched = parse_instant(j.at("fetched_at").get<std::string>());
    if (!fetched) throw Error(ErrorCode::parse_error, "bad fetched_at in enrichment entry");
    e.fetched_at = *fetched;
    if (j.contains("link")) {
        const json& l = j["link"];
        LinkStatus st;
        const std::string state = l.value("state", "broken");
        if (state == "ok") st.state = LinkState::ok;
        else if (state == "redirect") st.state = LinkState::redirect;
        else if (state == "timeout") st.state = LinkState::timeout;
        else st.state = LinkState::broken;
        if (l.contains("final_url")) st.final_url = l["final_url"].get<std::string>();
        if (l.contains("http_code")) st.http_code = l["http_code"].get<int>();
        e.link = st;
    }
    if (j.contains("url")) e.url = j["url"].get<std::string>();
    if (j.contains("flag")) e.flag = j["flag"].get<bool>();
    if (j.contains("access")) {
        const json& a = j["access"];
        AccessMode m;
        const std::string mode = a.value("mode", "unknown");
        if (mode == "open") m.mode = AccessState::open;
        else if (mode == "embargoed") m.mode = AccessState::embargoed;
        else if (mode == "closed") m.mode = AccessState::closed;
        else m.mode = AccessState::unknown;
        if (auto t = parse_instant(a.value("checked_at", ""))) m.checked_at = *t;
        if (a.contains("embargo_until"))
            m.embargo_until = parse_date(a["embargo_until"].get<std::string>());
        e.access = m;
    }
    if (j.contains("citations"))
        for (const auto& c : j["citations"])
            e.citations.push_back(
                {c.at("source").get<std::string>(), c.at("count").get<std::uint64_t>()});
    if (j.contains("visits"))
        e.visits = VisitCounts{j["visits"].value("total", std::uint64_t{0}),
                               j["visits"].value("last_30_days", std::uint64_t{0})};
    if (j.contains("count")) e.count = j["count"].get<std::uint64_t>();
    if (j.contains("related"))
        for (const auto& id : j["related"]) e.related.emplace_back(id.get<std::string>());
    return e;
}

// ---------------------------------------------------------------------------
// HTTP provider

namespace {

class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderSpec spec) : spec_(std::move(spec)) {}

    const std::string& name() const override { return spec_.name; }

    bool serves(EnrichKind kind) const override {
        return std::find(spec_.kinds.begin(), spec_.kinds.end(), kind) != spec_.kinds.end();
    }

    milliseconds budget() const override { return milliseconds(spec_.timeout_ms); }

    ProviderResult fetch(const ProviderRequest& request) override {
        httplib::Client client(spec_.base_url);
        const auto secs = spec_.timeout_ms / 1000;
        const auto usecs = (spec_.timeout_ms % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);

        httplib::Params params;
        params.emplace("kind", to_string(request.kind));
        if (!request.id.empty()) params.emplace("id", request.id);
        if (!request.list_id.empty()) params.emplace("list", request.list_id);
        if (!request.fields.title.empty()) params.emplace("title", request.fields.title);
        if (!request.fields.authors.empty())
            params.emplace("author", request.fields.authors.front());
        if (request.fields.doi) params.emplace("doi", *request.fields.doi);
        if (request.fields.url) params.emplace("url", *request.fields.url);

        httplib::Headers headers;
        if (request.etag) headers.emplace("If-None-Match", *request.etag);

        auto res = client.Get("/enrich", params, headers);
        if (!res)
            throw Error(ErrorCode::provider_failure,
                        "provider \"" + spec_.name + "\" unreachable");
        if (res->status == 304) {
            ProviderResult out;
            out.not_modified = true;
            if (request.etag) out.etag = request.etag;
            return out;
        }
        if (res->status < 200 || res->status >= 300)
            throw Error(ErrorCode::provider_failure,
                        "provider \"" + spec_.name + "\" answered HTTP " +
                            std::to_string(res->status));
        json body = json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("value"))
            throw Error(ErrorCode::provider_failure,
                        "provider \"" + spec_.name + "\" sent an unparsable payload");
        ProviderResult out;
        out.value = body["value"];
        if (res->has_header("ETag")) out.etag = res->get_header_value("ETag");
        return out;
    }

private:
    HttpProviderSpec spec_;
};

}  // namespace

std::shared_ptr<Provider> make_http_provider(const HttpProviderSpec& spec) {
    return std::make_shared<HttpProvider>(spec);
}

// ---------------------------------------------------------------------------
// Fan-out helpers

namespace {

struct ProviderAnswer {
    std::string name;
    std::optional<ProviderResult> result;  // nullopt = failed or overran budget
};

/// Starts every call immediately (one thread each) and abandons any that
/// overruns its provider's budget, so the slowest answered call bounds the
/// wall time. Results come back in configured provider order.
std::vector<ProviderAnswer> call_providers(
    const std::vector<std::shared_ptr<Provider>>& providers, const ProviderRequest& request) {
    struct Slot {
        std::string name;
        std::future<ProviderResult> future;
        steady::time_point deadline;
    };
    std::vector<Slot> slots;
    const auto t0 = steady::now();
    slots.reserve(providers.size());
    for (const auto& provider : providers) {
        auto task = std::make_shared<std::packaged_task<ProviderResult()>>(
            [provider, request] { return provider->fetch(request); });
        slots.push_back({provider->name(), task->get_future(), t0 + provider->budget()});
        std::thread([task] { (*task)(); }).detach();
    }
    std::vector<ProviderAnswer> out;
    out.reserve(slots.size());
    for (auto& slot : slots) {
        ProviderAnswer answer{slot.name, std::nullopt};
        if (slot.future.wait_until(slot.deadline) == std::future_status::ready) {
            try {
                answer.result = slot.future.get();
            } catch (const std::exception&) {
                // honest absence: a failed provider contributes nothing
            }
        }
        out.push_back(std::move(answer));
    }
    return out;
}

std::optional<Date> json_date(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) return std::nullopt;
    return parse_date(j[key].get<std::string>());
}

}  // namespace

// ---------------------------------------------------------------------------
// Enricher

Enricher::Enricher(Options options) : options_(std::move(options)) {
    if (!options_.clock) options_.clock = system_clock();
}

void Enricher::add_provider(std::shared_ptr<Provider> provider) {
    if (!provider) throw Error(ErrorCode::invalid_argument, "null provider");
    providers_.push_back(std::move(provider));
}

std::vector<std::shared_ptr<Provider>> Enricher::providers_for(EnrichKind kind) const {
    std::vector<std::shared_ptr<Provider>> out;
    for (const auto& p : providers_)
        if (p->serves(kind)) out.push_back(p);
    return out;
}

std::string Enricher::cache_key(const std::string& id, EnrichKind kind,
                                const std::string& list_id) const {
    return encode_component(id) + "#" + to_string(kind) + "#" + encode_component(list_id);
}

std::optional<EnrichmentEntry> Enricher::cached_entry(const std::string& key,
                                                      std::chrono::hours ttl,
                                                      bool ignore_ttl) const {
    std::optional<json> rec;
    if (options_.cache_store) {
        rec = options_.cache_store->find_record(kNsCache, key);
    } else {
        std::lock_guard lk(mem_cache_mu_);
        auto it = mem_cache_.find(key);
        if (it != mem_cache_.end()) rec = it->second;
    }
    if (!rec) return std::nullopt;
    auto stored_at = parse_instant(rec->value("stored_at", ""));
    if (!stored_at) return std::nullopt;
    if (!ignore_ttl) {
        const std::int64_t age = now().secs - stored_at->secs;
        if (age < 0 || age > std::chrono::seconds(ttl).count()) return std::nullopt;
    }
    try {
        return entry_from_json(rec->at("entry"));
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable cache rows are treated as misses
    }
}

std::optional<std::string> Enricher::cached_validator(const std::string& key,
                                                      const std::string& provider_name) const {
    std::optional<json> rec;
    if (options_.cache_store) {
        rec = options_.cache_store->find_record(kNsCache, key);
    } else {
        std::lock_guard lk(mem_cache_mu_);
        auto it = mem_cache_.find(key);
        if (it != mem_cache_.end()) rec = it->second;
    }
    if (!rec || !rec->contains("etag")) return std::nullopt;
    if (rec->value("etag_source", "") != provider_name) return std::nullopt;
    return (*rec)["etag"].get<std::string>();
}

void Enricher::store_cache_entry(const std::string& key, const EnrichmentEntry& entry,
                                 const ProviderRequest& request,
                                 const std::optional<std::string>& response_etag) {
    json rec;
    rec["entry"] = entry_to_json(entry);
    rec["stored_at"] = now().str();
    json req{{"id", request.id}, {"kind", to_string(request.kind)},
             {"list", request.list_id}};
    json fields = json::object();
    if (!request.fields.title.empty()) fields["title"] = request.fields.title;
    if (!request.fields.authors.empty()) fields["authors"] = request.fields.authors;
    if (request.fields.doi) fields["doi"] = *request.fields.doi;
    if (request.fields.url) fields["url"] = *request.fields.url;
    req["fields"] = fields;
    rec["request"] = req;
    if (response_etag) {
        rec["etag"] = *response_etag;
        rec["etag_source"] = entry.source;
    }
    if (options_.cache_store) {
        options_.cache_store->put_record(kNsCache, key, rec);
    } else {
        std::lock_guard lk(mem_cache_mu_);
        mem_cache_[key] = rec;
    }
}

// ---------------------------------------------------------------------------
// Per-kind resolution

namespace {

/// True when the enricher should treat this id as a local publication.
bool known_locally(Registry* registry, const std::string& id) {
    if (!registry || id.empty() || !PublicationId::is_valid(id)) return false;
    return registry->exists(PublicationId(id));
}

std::string join_sources(std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ",";
        out += n;
    }
    return out;
}

}  // namespace

std::optional<EnrichmentEntry> Enricher::compute_kind(EnrichKind kind, const std::string& id,
                                                      const CitationFields& fields,
                                                      const std::string& list_id,
                                                      const EnrichPolicy& policy,
                                                      std::optional<std::string>* etag_out) {
    const bool local = known_locally(options_.registry, id);
    const Date today = now().date();

    EnrichmentEntry entry;
    entry.kind = kind;
    entry.fetched_at = now();

    ProviderRequest request;
    request.kind = kind;
    request.id = id;
    request.fields = fields;
    request.list_id = list_id;

    auto providers = providers_for(kind);
    // Conditional fetch only makes sense with a single upstream source: a
    // validator from one provider must never be replayed against another.
    if (providers.size() == 1 && policy.freshness != Freshness::on_the_fly)
        request.etag = cached_validator(cache_key(id, kind, list_id), providers[0]->name());
    auto run_providers = [&](const ProviderRequest& req) {
        auto answers = call_providers(providers, req);
        if (etag_out && answers.size() == 1 && answers[0].result && answers[0].result->etag)
            *etag_out = answers[0].result->etag;
        return answers;
    };

    switch (kind) {
        case EnrichKind::link_status: {
            std::optional<std::string> url = fields.url;
            if (!url && local) {
                const PublicationId pid(id);
                if (auto ind = options_.registry->indirection(pid))
                    url = ind->current_url;
                else if (auto m = options_.registry->meta(pid); m.url)
                    url = m.url;
            }
            if (url && options_.link_fetcher) {
                entry.link = check_link(*url, options_.link_fetcher, options_.link_options);
                entry.source = "link-checker";
                return entry;
            }
            if (url) request.fields.url = url;
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                entry.link = entry_from_json(json{{"kind", "link_status"},
                                                  {"source", answer.name},
                                                  {"fetched_at", now().str()},
                                                  {"link", answer.result->value}})
                                 .link;
                entry.source = answer.name;
                return entry;
            }
            return std::nullopt;
        }

        case EnrichKind::discovered_link: {
            if (fields.url) {
                // The citation already carries a URL; no lookup is invented.
                entry.url = *fields.url;
                entry.source = "citation";
                return entry;
            }
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                entry.source = answer.name;
                if (v.is_object() && v.contains("url") && v["url"].is_string())
                    entry.url = v["url"].get<std::string>();
                return entry;  // an answered "no url known" is still an answer
            }
            return std::nullopt;
        }

        case EnrichKind::retraction: {
            std::optional<bool> flag;
            std::vector<std::string> sources;
            if (local) {
                flag = options_.registry->meta(PublicationId(id)).retracted;
                sources.push_back("registry");
            }
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (v.is_object() && v.contains("retracted") && v["retracted"].is_boolean()) {
                    flag = flag.value_or(false) || v["retracted"].get<bool>();
                    sources.push_back(answer.name);
                }
            }
            if (!flag) return std::nullopt;
            entry.flag = *flag;
            entry.source = join_sources(std::move(sources));
            return entry;
        }

        case EnrichKind::open_access: {
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (!v.is_object() || !v.contains("mode") || !v["mode"].is_string()) continue;
                AccessMode mode;
                mode.checked_at = now();
                const std::string m = v["mode"].get<std::string>();
                if (m == "open") mode.mode = AccessState::open;
                else if (m == "embargoed") mode.mode = AccessState::embargoed;
                else if (m == "closed") mode.mode = AccessState::closed;
                else mode.mode = AccessState::unknown;
                mode.embargo_until = json_date(v, "embargo_until");
                // A lapsed embargo reads as open today.
                if (mode.mode == AccessState::embargoed && mode.embargo_until &&
                    *mode.embargo_until <= today)
                    mode.mode = AccessState::open;
                entry.access = mode;
                entry.source = answer.name;
                return entry;
            }
            return std::nullopt;
        }

        case EnrichKind::citation_count: {
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (v.is_object() && v.contains("count") && v["count"].is_number())
                    entry.citations.push_back({answer.name, v["count"].get<std::uint64_t>()});
            }
            if (entry.citations.empty()) return std::nullopt;
            // Side by side, deterministic order, never reconciled.
            std::sort(entry.citations.begin(), entry.citations.end(),
                      [](const CitationCount& a, const CitationCount& b) {
                          return a.source < b.source;
                      });
            std::vector<std::string> names;
            for (const auto& c : entry.citations) names.push_back(c.source);
            entry.source = join_sources(std::move(names));
            return entry;
        }

        case EnrichKind::visit_counts: {
            if (local) {
                entry.visits = options_.registry->visit_counts(PublicationId(id));
                entry.source = "registry";
                return entry;
            }
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (!v.is_object() || !v.contains("total")) continue;
                VisitCounts counts;
                counts.total = v.value("total", std::uint64_t{0});
                counts.last_30_days = v.value("last_30_days", std::uint64_t{0});
                if (counts.last_30_days > counts.total) counts.last_30_days = counts.total;
                entry.visits = counts;
                entry.source = answer.name;
                return entry;
            }
            return std::nullopt;
        }

        case EnrichKind::click_count: {
            if (local) {
                entry.count =
                    options_.registry->click_count(list_id, PublicationId(id));
                entry.source = "registry";
                return entry;
            }
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (v.is_object() && v.contains("count") && v["count"].is_number()) {
                    entry.count = v["count"].get<std::uint64_t>();
                    entry.source = answer.name;
                    return entry;
                }
            }
            return std::nullopt;
        }

        case EnrichKind::bookmark_count: {
            std::uint64_t sum = 0;
            std::vector<std::string> sources;
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (v.is_object() && v.contains("count") && v["count"].is_number()) {
                    sum += v["count"].get<std::uint64_t>();
                    sources.push_back(answer.name);
                }
            }
            if (sources.empty()) return std::nullopt;
            entry.count = sum;  // the aggregation across bookmark systems
            entry.source = join_sources(std::move(sources));
            return entry;
        }

        case EnrichKind::translations: {
            std::set<std::string> ids;
            std::vector<std::string> sources;
            bool answered = false;
            if (local) {
                const auto m = options_.registry->meta(PublicationId(id));
                for (const auto& t : m.translations) ids.insert(t.value());
                sources.push_back("registry");
                answered = true;
            }
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                const json& v = answer.result->value;
                if (v.is_object() && v.contains("ids") && v["ids"].is_array()) {
                    for (const auto& t : v["ids"])
                        if (t.is_string()) ids.insert(t.get<std::string>());
                    sources.push_back(answer.name);
                    answered = true;
                }
            }
            if (!answered) return std::nullopt;
            for (const auto& t : ids)
                if (PublicationId::is_valid(t)) entry.related.emplace_back(t);
            entry.source = join_sources(std::move(sources));
            return entry;
        }

        case EnrichKind::recent_review: {
            std::vector<Date> dates;
            std::vector<std::string> sources;
            bool answered = false;
            if (local) {
                dates = options_.registry->reviews(PublicationId(id));
                sources.push_back("registry");
                answered = true;
            }
            for (const auto& answer : run_providers(request)) {
                if (!answer.result || answer.result->not_modified) continue;
                if (auto d = json_date(answer.result->value, "latest_review_date"))
                    dates.push_back(*d);
                sources.push_back(answer.name);
                answered = true;
            }
            if (!answered) return std::nullopt;
            const Date cutoff = today.plus_days(-policy.review_window_days);
            bool recent = false;
            for (const auto& d : dates)
                if (d >= cutoff && d <= today) recent = true;
            entry.flag = recent;
            entry.source = join_sources(std::move(sources));
            return entry;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// enrich

EnrichmentReport Enricher::enrich(const LivingReference& ref, const EnrichPolicy& policy) {
    CitationFields fields;
    return enrich(ref.target, fields, policy, ref.citing_doc);
}

EnrichmentReport Enricher::enrich(const PublicationId& id, const CitationFields& fields,
                                  const EnrichPolicy& policy, const std::string& list_id) {
    return enrich_impl(id.value(), fields, policy, list_id);
}

EnrichmentReport Enricher::enrich_impl(const std::string& id, const CitationFields& fields,
                                       const EnrichPolicy& policy,
                                       const std::string& list_id) {
    EnrichmentReport report;

    std::vector<EnrichKind> kinds;
    for (EnrichKind k : policy.kinds)
        if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
    if (kinds.empty()) throw Error(ErrorCode::invalid_argument, "enrichment policy selects no kinds");

    struct Fetched {
        std::optional<EnrichmentEntry> entry;
        std::optional<std::string> etag;
    };
    struct Pending {
        EnrichKind kind;
        std::string key;
        std::future<Fetched> future;
    };
    std::vector<Pending> pending;

    for (EnrichKind kind : kinds) {
        const std::string key = cache_key(id, kind, list_id);
        const auto ttl_it = policy.ttl_by_kind.find(kind);
        const std::chrono::hours ttl =
            ttl_it == policy.ttl_by_kind.end() ? policy.ttl : ttl_it->second;

        if (policy.freshness != Freshness::on_the_fly) {
            if (auto hit = cached_entry(key, ttl, policy.freshness == Freshness::cache_only)) {
                report.entries.emplace(kind, std::move(*hit));
                continue;
            }
            if (policy.freshness == Freshness::cache_only) continue;  // no fetching allowed
        }
        // Fan out: all kind computations start now and run concurrently;
        // each provider call inside is bounded by that provider's budget.
        pending.push_back(
            {kind, key,
             std::async(std::launch::async, [this, kind, id, fields, list_id, policy] {
                 Fetched got;
                 got.entry = compute_kind(kind, id, fields, list_id, policy, &got.etag);
                 return got;
             })});
    }

    for (auto& p : pending) {
        Fetched got;
        try {
            got = p.future.get();
        } catch (const std::exception&) {
            got.entry.reset();
        }
        std::optional<EnrichmentEntry>& entry = got.entry;
        if (entry) {
            ProviderRequest request;
            request.kind = p.kind;
            request.id = id;
            request.fields = fields;
            request.list_id = list_id;
            store_cache_entry(p.key, *entry, request, got.etag);
            report.entries.emplace(p.kind, std::move(*entry));
        } else if (policy.freshness == Freshness::cached) {
            // Refetch failed: the stale value (with its honest old
            // fetched_at) beats silence.
            if (auto stale = cached_entry(p.key, policy.ttl, /*ignore_ttl=*/true))
                report.entries.emplace(p.kind, std::move(*stale));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Single-attribute operations

std::optional<std::string> Enricher::discover_link(const CitationFields& fields) {
    if (fields.url) return fields.url;
    if (fields.title.empty() && !fields.doi)
        throw Error(ErrorCode::invalid_argument,
                    "link discovery needs a title, an author, or an identifier");
    ProviderRequest request;
    request.kind = EnrichKind::discovered_link;
    request.fields = fields;
    for (const auto& answer :
         call_providers(providers_for(EnrichKind::discovered_link), request)) {
        if (!answer.result || answer.result->not_modified) continue;
        const json& v = answer.result->value;
        if (v.is_object() && v.contains("url") && v["url"].is_string())
            return v["url"].get<std::string>();
    }
    return std::nullopt;
}

bool Enricher::check_retraction(const PublicationId& id) {
    EnrichPolicy policy;
    auto entry = compute_kind(EnrichKind::retraction, id.value(), {}, "", policy);
    if (!entry || !entry->flag)
        throw Error(ErrorCode::provider_failure,
                    "retraction status of \"" + id.value() +
                        "\" is unknowable: no registry record and no provider answered");
    return *entry->flag;
}

AccessMode Enricher::check_open_access(const PublicationId& id) {
    EnrichPolicy policy;
    auto entry = compute_kind(EnrichKind::open_access, id.value(), {}, "", policy);
    if (entry && entry->access) return *entry->access;
    AccessMode unknown;
    unknown.checked_at = now();
    return unknown;
}

std::uint64_t Enricher::fetch_citation_count(const PublicationId& id,
                                             const std::string& source) {
    std::shared_ptr<Provider> provider;
    for (const auto& p : providers_)
        if (p->name() == source) provider = p;
    if (!provider || !provider->serves(EnrichKind::citation_count))
        throw Error(ErrorCode::invalid_argument,
                    "no citation-count provider named \"" + source + "\"");
    ProviderRequest request;
    request.kind = EnrichKind::citation_count;
    request.id = id.value();
    auto answers = call_providers({provider}, request);
    if (!answers[0].result || !answers[0].result->value.is_object() ||
        !answers[0].result->value.contains("count"))
        throw Error(ErrorCode::provider_failure,
                    "provider \"" + source + "\" gave no citation count");
    return answers[0].result->value["count"].get<std::uint64_t>();
}

VisitCounts Enricher::fetch_visit_counts(const PublicationId& id) {
    if (options_.registry) return options_.registry->visit_counts(id);
    EnrichPolicy policy;
    auto entry = compute_kind(EnrichKind::visit_counts, id.value(), {}, "", policy);
    if (entry && entry->visits) return *entry->visits;
    throw Error(ErrorCode::provider_failure,
                "no local usage store and no provider answered for visit counts");
}

std::uint64_t Enricher::fetch_click_count(const std::string& list_id,
                                          const PublicationId& id) {
    if (options_.registry) return options_.registry->click_count(list_id, id);
    EnrichPolicy policy;
    auto entry = compute_kind(EnrichKind::click_count, id.value(), {}, list_id, policy);
    if (entry && entry->count) return *entry->count;
    throw Error(ErrorCode::provider_failure,
                "no local usage store and no provider answered for click counts");
}

std::uint64_t Enricher::fetch_bookmark_count(const PublicationId& id) {
    auto providers = providers_for(EnrichKind::bookmark_count);
    if (providers.empty()) return 0;  // sum over an empty set of systems
    EnrichPolicy policy;
    auto entry = compute_kind(EnrichKind::bookmark_count, id.value(), {}, "", policy);
    if (entry && entry->count) return *entry->count;
    throw Error(ErrorCode::provider_failure, "every bookmark provider failed");
}

std::vector<PublicationId> Enricher::check_translations(const PublicationId& id) {
    EnrichPolicy policy;
    auto entry = compute_kind(EnrichKind::translations, id.value(), {}, "", policy);
    if (entry) return entry->related;
    return {};
}

bool Enricher::check_recent_review(const PublicationId& id, int window_days) {
    EnrichPolicy policy;
    policy.review_window_days = window_days;
    auto entry = compute_kind(EnrichKind::recent_review, id.value(), {}, "", policy);
    return entry && entry->flag && *entry->flag;
}

// ---------------------------------------------------------------------------
// Cache maintenance

std::vector<Enricher::CacheEntryInfo> Enricher::cache_entries() const {
    std::vector<CacheEntryInfo> out;
    std::map<std::string, json> rows;
    if (options_.cache_store) {
        rows = options_.cache_store->snapshot(kNsCache);
    } else {
        std::lock_guard lk(mem_cache_mu_);
        rows = mem_cache_;
    }
    for (const auto& [key, rec] : rows) {
        (void)key;
        if (!rec.is_object() || !rec.contains("request")) continue;
        const json& req = rec["request"];
        auto kind = enrich_kind_from_string(req.value("kind", ""));
        auto stored = parse_instant(rec.value("stored_at", ""));
        if (!kind || !stored) continue;
        CacheEntryInfo info;
        info.id = req.value("id", std::string());
        info.kind = *kind;
        info.list_id = req.value("list", std::string());
        info.stored_at = *stored;
        out.push_back(std::move(info));
    }
    return out;
}

bool Enricher::refresh_cache_entry(const CacheEntryInfo& info) {
    const std::string key = cache_key(info.id, info.kind, info.list_id);
    CitationFields fields;
    {
        std::optional<json> rec;
        if (options_.cache_store) {
            rec = options_.cache_store->find_record(kNsCache, key);
        } else {
            std::lock_guard lk(mem_cache_mu_);
            auto it = mem_cache_.find(key);
            if (it != mem_cache_.end()) rec = it->second;
        }
        if (rec && rec->contains("request") && (*rec)["request"].contains("fields")) {
            const json& f = (*rec)["request"]["fields"];
            fields.title = f.value("title", std::string());
            if (f.contains("authors"))
                fields.authors = f["authors"].get<std::vector<std::string>>();
            if (f.contains("doi")) fields.doi = f["doi"].get<std::string>();
            if (f.contains("url")) fields.url = f["url"].get<std::string>();
        }
    }
    EnrichPolicy policy;
    std::optional<EnrichmentEntry> entry;
    std::optional<std::string> etag;
    try {
        entry = compute_kind(info.kind, info.id, fields, info.list_id, policy, &etag);
    } catch (const std::exception&) {
        entry.reset();
    }
    if (!entry) return false;  // previous value (and fetched_at) stays served
    ProviderRequest request;
    request.kind = info.kind;
    request.id = info.id;
    request.fields = fields;
    request.list_id = info.list_id;
    store_cache_entry(key, *entry, request, etag);
    return true;
}

}  // namespace alive
