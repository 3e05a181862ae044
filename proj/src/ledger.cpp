// Revision-ledger operations of the Registry: publishing, name resolution,
// the change protocol, update checks, track promotion, and retraction.

#include <algorithm>

#include "alive/json_io.hpp"
#include "alive/registry.hpp"
#include "registry_state.hpp"

namespace alive {

namespace {

const RevisionRecord* latest_for(const std::vector<RevisionRecord>& revisions,
                                 ResolvePolicy policy) {
    if (policy == ResolvePolicy::latest_any)
        return revisions.empty() ? nullptr : &revisions.back();
    // Official track: highest-numbered official revision.
    for (auto it = revisions.rbegin(); it != revisions.rend(); ++it)
        if (it->track == Track::official) return &*it;
    return nullptr;
}

}  // namespace

RevisionRecord Registry::publish_revision(const PublicationId& pub, std::string_view body,
                                          const std::string& note, Track track) {
    if (body.empty()) throw Error(ErrorCode::invalid_argument, "empty publication body");
    auto lock = writer_lock("pub:" + pub.value());

    PubState s;
    if (auto existing = find_pub(pub)) {
        s = std::move(*existing);
    } else {
        s.id = pub;
        s.created_at = now();
    }

    RevisionRecord rec;
    rec.pub = pub;
    rec.version = static_cast<std::uint32_t>(s.revisions.size()) + 1;
    rec.timestamp = now();
    // Version order is authoritative; never let a clock step make the
    // timestamp sequence decrease.
    if (!s.revisions.empty() && rec.timestamp < s.revisions.back().timestamp)
        rec.timestamp = s.revisions.back().timestamp;
    rec.content_hash = content_hash(body);
    rec.note = note;
    rec.track = track;
    rec.body_size = body.size();

    // The body file lands first; the ledger append below is the commit
    // point, so a failure here leaves the ledger unchanged.
    atomic_write_file(body_path(pub, rec.version), body);

    s.revisions.push_back(rec);
    s.meta.last_revision_date = rec.timestamp.date();
    save_pub(s);

    // Committed: flag citing documents, then push the mirror copy.
    on_revision(pub, rec.version, rec.timestamp.date());
    try {
        mirror_sync_locked(pub);
    } catch (const Error&) {
        // Mirror trouble never un-publishes; the pending flag is durable
        // and retry_pending_mirrors picks it up.
    }
    return rec;
}

RevisionRecord Registry::resolve(const VersionedName& name, ResolvePolicy policy) const {
    PubState s = load_pub(name.base);
    if (name.version) {
        if (*name.version == 0 || *name.version > s.revisions.size())
            throw Error(ErrorCode::not_found_version,
                        "publication \"" + name.base.value() + "\" has no version v" +
                            std::to_string(*name.version));
        return s.revisions[*name.version - 1];
    }
    const RevisionRecord* latest = latest_for(s.revisions, policy);
    if (!latest)
        throw Error(ErrorCode::not_found_version,
                    "publication \"" + name.base.value() + "\" has no " +
                        (policy == ResolvePolicy::latest_official ? "official version"
                                                                  : "versions"));
    return *latest;
}

RevisionRecord Registry::resolve(const std::string& name, ResolvePolicy policy) const {
    return resolve(parse_versioned_name(name), policy);
}

std::vector<HistoryEntry> Registry::history(const PublicationId& pub) const {
    PubState s = load_pub(pub);
    std::vector<HistoryEntry> out;
    out.reserve(s.revisions.size() + s.events.size());
    for (const auto& r : s.revisions) {
        HistoryEntry e;
        e.kind = EventKind::revision;
        e.version = r.version;
        e.timestamp = r.timestamp;
        e.note = r.note;
        e.track = r.track;
        e.content_hash = r.content_hash;
        out.push_back(std::move(e));
    }
    out.insert(out.end(), s.events.begin(), s.events.end());
    std::stable_sort(out.begin(), out.end(), [](const HistoryEntry& a, const HistoryEntry& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        // Same instant: the revision itself precedes administrative entries,
        // then order by version for determinism.
        if ((a.kind == EventKind::revision) != (b.kind == EventKind::revision))
            return a.kind == EventKind::revision;
        return a.version < b.version;
    });
    return out;
}

UpdateStatus Registry::check_for_updates(const VersionedName& name,
                                         ResolvePolicy policy) const {
    PubState s = load_pub(name.base);
    const RevisionRecord* latest = latest_for(s.revisions, policy);
    if (!latest)
        throw Error(ErrorCode::not_found_version,
                    "publication \"" + name.base.value() + "\" has no resolvable version");

    std::uint32_t queried = latest->version;
    if (name.version) {
        if (*name.version == 0 || *name.version > s.revisions.size())
            throw Error(ErrorCode::not_found_version,
                        "publication \"" + name.base.value() + "\" has no version v" +
                            std::to_string(*name.version));
        queried = *name.version;
    }

    UpdateStatus status;
    status.newer_exists = latest->version > queried;
    status.latest = VersionedName{name.base, latest->version};
    status.latest_timestamp = latest->timestamp;
    status.retracted = s.meta.retracted;
    return status;
}

RevisionRecord Registry::promote(const PublicationId& pub, std::uint32_t version) {
    return promote(pub, version, opts_.promotion);
}

RevisionRecord Registry::promote(const PublicationId& pub, std::uint32_t version,
                                 const PromotionPolicy& policy) {
    auto lock = writer_lock("pub:" + pub.value());
    return promote_locked(pub, version, policy);
}

RevisionRecord Registry::promote_locked(const PublicationId& pub, std::uint32_t version,
                                        const PromotionPolicy& policy) {
    PubState s = load_pub(pub);
    if (version == 0 || version > s.revisions.size())
        throw Error(ErrorCode::not_found_version, "publication \"" + pub.value() +
                                                      "\" has no version v" +
                                                      std::to_string(version));
    RevisionRecord& rec = s.revisions[version - 1];
    if (rec.track == Track::official)
        throw Error(ErrorCode::invalid_state, "version v" + std::to_string(version) +
                                                  " of \"" + pub.value() +
                                                  "\" is already official");

    const Date today = now().date();
    if (s.last_promotion && policy.min_interval_days > 0) {
        const std::int64_t elapsed = days_between(*s.last_promotion, today);
        if (elapsed < policy.min_interval_days) {
            const Date next = s.last_promotion->plus_days(policy.min_interval_days);
            throw Error(ErrorCode::rate_limited,
                        "promotion interval not met for \"" + pub.value() +
                            "\"; next allowed on " + next.str(),
                        next);
        }
    }

    rec.track = Track::official;
    s.last_promotion = today;

    HistoryEntry event;
    event.kind = EventKind::promotion;
    event.version = version;
    event.timestamp = now();
    event.note = "promoted to official track";
    event.track = Track::official;
    s.events.push_back(event);

    save_pub(s);
    return rec;
}

void Registry::retract(const PublicationId& pub, const std::string& reason) {
    auto lock = writer_lock("pub:" + pub.value());
    PubState s = load_pub(pub);
    if (s.meta.retracted) return;  // idempotent; the flag never un-sets here

    s.meta.retracted = true;

    HistoryEntry event;
    event.kind = EventKind::retraction;
    event.version = static_cast<std::uint32_t>(s.revisions.size());
    event.timestamp = now();
    event.note = reason;
    event.track = s.revisions.empty() ? Track::author : s.revisions.back().track;
    s.events.push_back(event);

    save_pub(s);
}

}  // namespace alive
