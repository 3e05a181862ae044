#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alive/core.hpp"
#include "alive/store.hpp"

namespace alive {

/// How a bare (suffix-less) name picks a version.
enum class ResolvePolicy { latest_any, latest_official };
const char* to_string(ResolvePolicy policy);
std::optional<ResolvePolicy> resolve_policy_from_string(std::string_view text);

/// Answer to a "check for updates" query.
struct UpdateStatus {
    bool newer_exists = false;
    VersionedName latest;
    Instant latest_timestamp;
    bool retracted = false;
};

/// Spacing rule for promotions to the official track.
struct PromotionPolicy {
    int min_interval_days = 90;
};

/// Stable-id → current-URL mapping with an append-only remap history.
struct IndirectionEntry {
    struct Remap {
        std::string url;
        Instant changed_at;
    };
    PublicationId id;
    std::string current_url;
    std::vector<Remap> history;  // current_url always equals history.back().url
};

/// Last known state of the secondary copy of a publication's latest body.
struct MirrorState {
    PublicationId id;
    std::uint32_t mirrored_version = 0;  // 0 = nothing mirrored yet
    std::string mirrored_hash;
    Instant synced_at;
    bool pending = false;  // last sync failed; a retry is owed
};

/// Destination for mirror copies. The default writes files under the
/// registry root; tests substitute fault-injecting transports.
class MirrorTransport {
public:
    virtual ~MirrorTransport() = default;
    /// Atomically stores the body for (id, version); throws on failure
    /// leaving any previous copy intact.
    virtual void write_body(const PublicationId& id, std::uint32_t version,
                            std::string_view bytes) = 0;
    virtual std::optional<std::string> read_body(const PublicationId& id,
                                                 std::uint32_t version) = 0;
};

std::shared_ptr<MirrorTransport> make_file_mirror(std::filesystem::path dir);

/// The registry: revision ledger, backlink/staleness tracking, DOI-style
/// indirection, mirror synchronization, and usage counters, all persisted
/// in one RecordStore rooted at `root`.
///
/// Writes to one publication are serialized internally; reads are
/// concurrent and see only committed state.
class Registry {
public:
    struct Options {
        Clock clock = system_clock();
        PromotionPolicy promotion;
        RecordStore::Options store;
    };

    explicit Registry(std::filesystem::path root, Options opts);
    explicit Registry(std::filesystem::path root) : Registry(std::move(root), Options{}) {}

    // --- revision ledger -------------------------------------------------

    /// Appends the next revision (creating the publication on first call),
    /// advances the publication's last-revision date, marks citing
    /// documents stale, and pushes the body to the mirror (best effort; a
    /// failed mirror write leaves a durable pending flag).
    RevisionRecord publish_revision(const PublicationId& pub, std::string_view body,
                                    const std::string& note, Track track = Track::author);
    RevisionRecord resolve(const VersionedName& name,
                           ResolvePolicy policy = ResolvePolicy::latest_any) const;
    RevisionRecord resolve(const std::string& name,
                           ResolvePolicy policy = ResolvePolicy::latest_any) const;
    /// Complete protocol of changes: revisions plus administrative entries
    /// (retractions, promotions), in chronological order.
    std::vector<HistoryEntry> history(const PublicationId& pub) const;
    UpdateStatus check_for_updates(const VersionedName& name,
                                   ResolvePolicy policy = ResolvePolicy::latest_any) const;
    /// Moves an author-track revision to the official track. Rejects with a
    /// rate-limited error (carrying the next allowed date) when the policy
    /// interval since the previous promotion has not elapsed.
    RevisionRecord promote(const PublicationId& pub, std::uint32_t version);
    RevisionRecord promote(const PublicationId& pub, std::uint32_t version,
                           const PromotionPolicy& policy);
    /// Flags the publication retracted and logs the reason in the history.
    /// Content and history are preserved; repeated calls are idempotent.
    void retract(const PublicationId& pub, const std::string& reason);

    bool exists(const PublicationId& pub) const;
    MetaAttributes meta(const PublicationId& pub) const;
    /// Replaces descriptive attributes. The retracted flag is administrative
    /// and is preserved from the stored record, not taken from `attrs`.
    void update_meta(const PublicationId& pub, const MetaAttributes& attrs);
    std::string body(const PublicationId& pub, std::uint32_t version) const;
    std::vector<PublicationId> publications() const;

    // --- backlinks & staleness -------------------------------------------

    /// Registers (or re-registers) that `citing_doc` cites `target` as of
    /// `recorded`. Re-registration replaces the record and clears any
    /// earlier acknowledgement.
    Backlink register_backlink(const std::string& citing_doc, const PublicationId& target,
                               const Date& recorded);
    /// Marks the reference reviewed against the target's current revision;
    /// the stale flag clears until the next revision.
    Backlink acknowledge(const std::string& citing_doc, const PublicationId& target,
                         Instant at);
    /// Revision hook (run by publish_revision): flips fresh backlinks to
    /// stale and appends one notification per newly stale citing document.
    std::vector<Notification> on_revision(const PublicationId& target,
                                          std::uint32_t new_version, const Date& new_date);
    std::optional<Backlink> find_backlink(const std::string& citing_doc,
                                          const PublicationId& target) const;
    std::vector<Backlink> backlinks_of(const PublicationId& target) const;
    std::vector<Notification> peek_notifications(const std::string& citing_doc) const;
    std::vector<Notification> drain_notifications(const std::string& citing_doc);

    // --- indirection & mirror ----------------------------------------------

    /// Creates the entry (first history element) or remaps when it exists.
    IndirectionEntry put_url(const PublicationId& id, const std::string& url);
    /// Changes where the stable id points. History grows even when the URL
    /// is unchanged, for auditability.
    IndirectionEntry remap(const PublicationId& id, const std::string& new_url);
    std::string resolve_id(const PublicationId& id) const;
    std::optional<IndirectionEntry> indirection(const PublicationId& id) const;

    /// Pushes the latest body to the mirror. Unreachable mirror → throws
    /// after recording a durable pending flag; the primary is untouched.
    MirrorState mirror_sync(const PublicationId& id);
    std::optional<MirrorState> mirror_state(const PublicationId& id) const;
    /// Re-runs mirror_sync for every pending publication; returns how many
    /// were brought back in sync.
    int retry_pending_mirrors();
    void set_mirror_transport(std::shared_ptr<MirrorTransport> transport);
    std::optional<std::string> mirror_body(const PublicationId& id,
                                           std::uint32_t version) const;

    // --- usage counters & reviews ------------------------------------------

    void record_visit(const PublicationId& id);
    VisitCounts visit_counts(const PublicationId& id) const;
    void record_click(const std::string& list_id, const PublicationId& id);
    std::uint64_t click_count(const std::string& list_id, const PublicationId& id) const;
    void add_review(const PublicationId& id, const Date& reviewed_on,
                    const std::string& reviewer = std::string());
    std::vector<Date> reviews(const PublicationId& id) const;

    RecordStore& store() { return store_; }
    const RecordStore& store() const { return store_; }
    const std::filesystem::path& root() const { return root_; }
    Instant now() const { return opts_.clock(); }
    const PromotionPolicy& promotion_policy() const { return opts_.promotion; }

    struct PubState;  // internal persisted state; defined in src/registry_state.hpp

private:
    PubState load_pub(const PublicationId& pub) const;
    std::optional<PubState> find_pub(const PublicationId& pub) const;
    void save_pub(const PubState& state);
    RevisionRecord promote_locked(const PublicationId& pub, std::uint32_t version,
                                  const PromotionPolicy& policy);
    MirrorState mirror_sync_locked(const PublicationId& id);
    std::filesystem::path body_path(const PublicationId& pub, std::uint32_t version) const;
    std::unique_lock<std::mutex> writer_lock(const std::string& key);

    std::filesystem::path root_;
    Options opts_;
    RecordStore store_;
    std::shared_ptr<MirrorTransport> mirror_;
    std::mutex locks_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Writes `bytes` to `path` via a temp file + rename so readers never see a
/// half-written body.
void atomic_write_file(const std::filesystem::path& path, std::string_view bytes);
std::optional<std::string> read_file_if_exists(const std::filesystem::path& path);

}  // namespace alive
