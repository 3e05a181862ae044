#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alive/core.hpp"
#include "alive/registry.hpp"
#include "alive/store.hpp"

namespace alive {

/// The living attributes a reference can carry.
enum class EnrichKind {
    link_status,
    discovered_link,
    retraction,
    open_access,
    citation_count,
    visit_counts,
    click_count,
    bookmark_count,
    translations,
    recent_review,
};

const char* to_string(EnrichKind kind);
std::optional<EnrichKind> enrich_kind_from_string(std::string_view text);
const std::vector<EnrichKind>& all_enrich_kinds();

// ---------------------------------------------------------------------------
// Link checking

enum class LinkState { ok, redirect, broken, timeout };
const char* to_string(LinkState state);

struct LinkStatus {
    LinkState state = LinkState::broken;
    std::optional<std::string> final_url;  // set when the chain moved
    std::optional<int> http_code;          // last HTTP status seen
};

/// One HTTP exchange, no redirects followed. `status` 0 with
/// transport_error set means the request never produced a response.
struct HopResult {
    int status = 0;
    std::optional<std::string> location;
    bool transport_error = false;
    bool timed_out = false;
    std::chrono::milliseconds elapsed{0};
};

using HopFetcher = std::function<HopResult(const std::string& url)>;

struct LinkCheckOptions {
    std::chrono::milliseconds budget{2000};
    int max_hops = 8;
};

/// Classifies a URL: 2xx directly → ok; a 3xx chain ending in 2xx →
/// redirect with final_url; 4xx/5xx, transport failure, hop overrun, or a
/// redirect loop → broken; budget exhaustion → timeout. A syntactically
/// invalid URL is an input error, never "broken".
LinkStatus check_link(const std::string& url, const HopFetcher& fetch,
                      const LinkCheckOptions& options = LinkCheckOptions{});

/// Real single-hop fetcher (plain GET, redirects not followed) for
/// http:// URLs. This build carries no TLS, so https targets report a
/// transport failure instead of a guess.
HopFetcher http_hop_fetcher(std::chrono::milliseconds per_hop_timeout);

bool plausible_url(std::string_view url);

// ---------------------------------------------------------------------------
// Open access & report entries

enum class AccessState { open, embargoed, closed, unknown };
const char* to_string(AccessState state);

struct AccessMode {
    AccessState mode = AccessState::unknown;
    Instant checked_at;
    std::optional<Date> embargo_until;
};

struct CitationCount {
    std::string source;
    std::uint64_t count = 0;
};

/// One attribute of an EnrichmentReport. `kind` says which of the payload
/// fields is meaningful (exactly one per kind; `citations` may hold several
/// sources side by side — they are never reconciled).
struct EnrichmentEntry {
    EnrichKind kind = EnrichKind::link_status;
    std::string source;  // provider name(s) or "registry"
    Instant fetched_at;

    std::optional<LinkStatus> link;          // link_status
    std::optional<std::string> url;          // discovered_link
    std::optional<bool> flag;                // retraction, recent_review
    std::optional<AccessMode> access;        // open_access
    std::vector<CitationCount> citations;    // citation_count
    std::optional<VisitCounts> visits;       // visit_counts
    std::optional<std::uint64_t> count;      // click_count, bookmark_count
    std::vector<PublicationId> related;      // translations
};

json entry_to_json(const EnrichmentEntry& entry);
EnrichmentEntry entry_from_json(const json& j);

/// Per-attribute facts with provenance. An absent kind means "not
/// attempted, or every provider failed" — never a fabricated value.
struct EnrichmentReport {
    std::map<EnrichKind, EnrichmentEntry> entries;

    const EnrichmentEntry* find(EnrichKind kind) const {
        auto it = entries.find(kind);
        return it == entries.end() ? nullptr : &it->second;
    }
};

// ---------------------------------------------------------------------------
// Providers

struct ProviderRequest {
    EnrichKind kind = EnrichKind::link_status;
    std::string id;       // target publication id ("" when only fields are known)
    CitationFields fields;
    std::string list_id;  // reference-list context for click counts
    std::optional<std::string> etag;  // validator for conditional fetches
};

struct ProviderResult {
    json value;  // kind-specific payload; wire shapes documented in README
    std::optional<std::string> etag;
    bool not_modified = false;  // cached copy still valid; value is empty
};

/// A source of living attributes. Implementations either answer within
/// their budget or throw; the pipeline abandons calls that overrun.
class Provider {
public:
    virtual ~Provider() = default;
    virtual const std::string& name() const = 0;
    virtual bool serves(EnrichKind kind) const = 0;
    virtual std::chrono::milliseconds budget() const = 0;
    virtual ProviderResult fetch(const ProviderRequest& request) = 0;
};

/// HTTP-backed provider speaking the GET /enrich wire protocol.
struct HttpProviderSpec {
    std::string name;
    std::vector<EnrichKind> kinds;
    std::string base_url;  // e.g. "http://127.0.0.1:8091"
    int timeout_ms = 2000;
};

std::shared_ptr<Provider> make_http_provider(const HttpProviderSpec& spec);

// ---------------------------------------------------------------------------
// The pipeline

enum class Freshness {
    on_the_fly,  // always fetch; never read the cache
    cached,      // serve cache within TTL, refetch past it
    cache_only,  // serve cache only; never fetch (nightly-refresh serving mode)
};

struct EnrichPolicy {
    std::vector<EnrichKind> kinds = all_enrich_kinds();
    Freshness freshness = Freshness::on_the_fly;
    std::chrono::hours ttl{24};
    std::map<EnrichKind, std::chrono::hours> ttl_by_kind;
    int review_window_days = 180;
};

/// Computes living attributes by fanning provider calls out concurrently,
/// each under its own budget, with honest absence on failure. When a
/// Registry is attached it is the authority for retraction, translations,
/// usage counters, and reviews of publications it holds.
class Enricher {
public:
    struct Options {
        Clock clock = system_clock();
        Registry* registry = nullptr;        // optional local authority
        RecordStore* cache_store = nullptr;  // optional persistent cache
        HopFetcher link_fetcher;             // used for link_status when set
        LinkCheckOptions link_options;
    };

    explicit Enricher(Options options);
    Enricher() : Enricher(Options{}) {}

    void add_provider(std::shared_ptr<Provider> provider);
    const std::vector<std::shared_ptr<Provider>>& providers() const { return providers_; }

    EnrichmentReport enrich(const LivingReference& ref, const EnrichPolicy& policy);
    EnrichmentReport enrich(const PublicationId& id, const CitationFields& fields,
                            const EnrichPolicy& policy, const std::string& list_id = "");

    // Single-attribute operations (same sourcing rules as enrich).
    std::optional<std::string> discover_link(const CitationFields& fields);
    /// True iff the registry or a provider marks the id retracted; throws a
    /// provider failure when nobody can answer (never a fabricated "false").
    bool check_retraction(const PublicationId& id);
    AccessMode check_open_access(const PublicationId& id);
    std::uint64_t fetch_citation_count(const PublicationId& id, const std::string& source);
    VisitCounts fetch_visit_counts(const PublicationId& id);
    std::uint64_t fetch_click_count(const std::string& list_id, const PublicationId& id);
    /// Sum over the configured bookmark providers that answered.
    std::uint64_t fetch_bookmark_count(const PublicationId& id);
    std::vector<PublicationId> check_translations(const PublicationId& id);
    bool check_recent_review(const PublicationId& id, int window_days = 180);

    // Cache maintenance (drives the nightly refresh).
    struct CacheEntryInfo {
        std::string id;
        EnrichKind kind = EnrichKind::link_status;
        std::string list_id;
        Instant stored_at;
    };
    std::vector<CacheEntryInfo> cache_entries() const;
    /// Refetches one cache entry in place. On failure the previous value
    /// stays, with its original fetched_at. Returns true when refreshed.
    bool refresh_cache_entry(const CacheEntryInfo& info);

    Instant now() const { return options_.clock(); }

private:
    EnrichmentReport enrich_impl(const std::string& id, const CitationFields& fields,
                                 const EnrichPolicy& policy, const std::string& list_id);
    std::optional<EnrichmentEntry> compute_kind(EnrichKind kind, const std::string& id,
                                                const CitationFields& fields,
                                                const std::string& list_id,
                                                const EnrichPolicy& policy,
                                                std::optional<std::string>* etag_out = nullptr);
    std::vector<std::shared_ptr<Provider>> providers_for(EnrichKind kind) const;
    std::string cache_key(const std::string& id, EnrichKind kind,
                          const std::string& list_id) const;
    std::optional<EnrichmentEntry> cached_entry(const std::string& key,
                                                std::chrono::hours ttl,
                                                bool ignore_ttl) const;
    std::optional<std::string> cached_validator(const std::string& key,
                                                const std::string& provider_name) const;
    void store_cache_entry(const std::string& key, const EnrichmentEntry& entry,
                           const ProviderRequest& request,
                           const std::optional<std::string>& response_etag);

    Options options_;
    std::vector<std::shared_ptr<Provider>> providers_;
    // In-memory cache used when no persistent cache store is attached.
    mutable std::mutex mem_cache_mu_;
    std::map<std::string, json> mem_cache_;
};

}  // namespace alive
