// Backlink registry and staleness notification: which documents cite which
// publication, the possibly-outdated flag, acknowledgements, and the
// per-document notification outbox.

#include "alive/json_io.hpp"
#include "alive/registry.hpp"

namespace alive {

namespace {

constexpr const char* kNsBacklinks = "backlinks";
constexpr const char* kNsNotifications = "notifications";

std::string backlink_key(const std::string& citing_doc, const PublicationId& target) {
    return encode_component(citing_doc) + "#" + encode_component(target.value());
}

/// The date a backlink is effectively current to: the recorded revision
/// date, advanced by any later acknowledgement.
Date effective_date(const Backlink& b) {
    Date d = b.recorded_revision_date;
    if (b.acknowledged_at && b.acknowledged_at->date() > d) d = b.acknowledged_at->date();
    return d;
}

}  // namespace

Backlink Registry::register_backlink(const std::string& citing_doc,
                                     const PublicationId& target, const Date& recorded) {
    if (citing_doc.empty())
        throw Error(ErrorCode::invalid_argument, "empty citing document identifier");
    if (!recorded.valid())
        throw Error(ErrorCode::invalid_argument, "invalid recorded revision date");
    const MetaAttributes target_meta = meta(target);  // throws when target unknown

    auto lock = writer_lock("bl:" + citing_doc + "#" + target.value());
    Backlink b;
    b.citing_doc = citing_doc;
    b.target = target;
    b.recorded_revision_date = recorded;
    // Re-registration is a fresh record: any earlier acknowledgement is gone.
    b.acknowledged_at.reset();
    b.stale = target_meta.last_revision_date && *target_meta.last_revision_date > recorded;
    store_.put_record(kNsBacklinks, backlink_key(citing_doc, target), json(b));
    return b;
}

Backlink Registry::acknowledge(const std::string& citing_doc, const PublicationId& target,
                               Instant at) {
    auto lock = writer_lock("bl:" + citing_doc + "#" + target.value());
    auto rec = store_.find_record(kNsBacklinks, backlink_key(citing_doc, target));
    if (!rec)
        throw Error(ErrorCode::not_found_backlink, "no backlink from \"" + citing_doc +
                                                       "\" to \"" + target.value() + "\"");
    Backlink b = rec->get<Backlink>();
    const MetaAttributes target_meta = meta(target);
    if (target_meta.last_revision_date) b.recorded_revision_date = *target_meta.last_revision_date;
    b.acknowledged_at = at;
    b.stale = false;
    store_.put_record(kNsBacklinks, backlink_key(citing_doc, target), json(b));
    return b;
}

std::vector<Notification> Registry::on_revision(const PublicationId& target,
                                                std::uint32_t new_version,
                                                const Date& new_date) {
    std::vector<Notification> created;
    for (const auto& [key, value] : store_.snapshot(kNsBacklinks)) {
        (void)key;
        Backlink b = value.get<Backlink>();
        if (b.target != target) continue;
        if (new_date <= effective_date(b)) continue;
        if (b.stale) continue;  // already flagged by an earlier revision

        auto lock = writer_lock("bl:" + b.citing_doc + "#" + target.value());
        b.stale = true;
        store_.put_record(kNsBacklinks, backlink_key(b.citing_doc, target), json(b));

        Notification n;
        n.citing_doc = b.citing_doc;
        n.target = target;
        n.new_version = new_version;
        n.new_date = new_date;
        n.created_at = now();

        auto outbox_lock = writer_lock("outbox:" + b.citing_doc);
        const std::string outbox_key = encode_component(b.citing_doc);
        json outbox = store_.find_record(kNsNotifications, outbox_key)
                          .value_or(json{{"items", json::array()}});
        bool duplicate = false;
        for (const auto& item : outbox["items"]) {
            if (item.at("target").get<std::string>() == target.value() &&
                item.at("new_version").get<std::uint32_t>() == new_version)
                duplicate = true;
        }
        if (!duplicate) {
            outbox["items"].push_back(json(n));
            store_.put_record(kNsNotifications, outbox_key, outbox);
            created.push_back(std::move(n));
        }
    }
    return created;
}

std::optional<Backlink> Registry::find_backlink(const std::string& citing_doc,
                                                const PublicationId& target) const {
    auto rec = store_.find_record(kNsBacklinks, backlink_key(citing_doc, target));
    if (!rec) return std::nullopt;
    return rec->get<Backlink>();
}

std::vector<Backlink> Registry::backlinks_of(const PublicationId& target) const {
    std::vector<Backlink> out;
    for (const auto& [key, value] : store_.list_records(kNsBacklinks)) {
        (void)key;
        Backlink b = value.get<Backlink>();
        if (b.target == target) out.push_back(std::move(b));
    }
    return out;
}

std::vector<Notification> Registry::peek_notifications(const std::string& citing_doc) const {
    std::vector<Notification> out;
    auto rec = store_.find_record(kNsNotifications, encode_component(citing_doc));
    if (!rec) return out;
    for (const auto& item : rec->value("items", json::array()))
        out.push_back(item.get<Notification>());
    return out;
}

std::vector<Notification> Registry::drain_notifications(const std::string& citing_doc) {
    auto lock = writer_lock("outbox:" + citing_doc);
    std::vector<Notification> out = peek_notifications(citing_doc);
    if (!out.empty())
        store_.put_record(kNsNotifications, encode_component(citing_doc),
                          json{{"items", json::array()}});
    return out;
}

}  // namespace alive
