#include "alive/registry.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>

#include "alive/json_io.hpp"
#include "registry_state.hpp"

namespace alive {

namespace fs = std::filesystem;

namespace {

constexpr const char* kNsPublications = "publications";
constexpr const char* kNsIndirection = "indirection";
constexpr const char* kNsMirror = "mirror";
constexpr const char* kNsCounters = "counters";
constexpr const char* kNsReviews = "reviews";

// Visit events older than this are pruned; must exceed the 30-day window.
constexpr std::int64_t kVisitRetentionDays = 40;

std::string pub_key(const PublicationId& id) { return encode_component(id.value()); }

}  // namespace

const char* to_string(ResolvePolicy policy) {
    return policy == ResolvePolicy::latest_official ? "latest_official" : "latest_any";
}

std::optional<ResolvePolicy> resolve_policy_from_string(std::string_view text) {
    if (text == "latest_any") return ResolvePolicy::latest_any;
    if (text == "latest_official") return ResolvePolicy::latest_official;
    return std::nullopt;
}

void atomic_write_file(const fs::path& path, std::string_view bytes) {
    if (const fs::path parent = path.parent_path(); !parent.empty()) {
        std::error_code ec;
        fs::create_directories(parent, ec);
        if (ec)
            throw Error(ErrorCode::storage_failure,
                        "cannot create " + parent.string() + ": " + ec.message());
    }
    const fs::path tmp = path.string() + ".tmp";
    FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f)
        throw Error(ErrorCode::storage_failure,
                    "cannot open " + tmp.string() + ": " + std::strerror(errno));
    const size_t written = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
    const bool flushed = std::fflush(f) == 0;
    std::fclose(f);
    if (written != bytes.size() || !flushed) {
        std::remove(tmp.c_str());
        throw Error(ErrorCode::storage_failure, "short write to " + tmp.string());
    }
    std::error_code rc;
    fs::rename(tmp, path, rc);
    if (rc) {
        std::remove(tmp.c_str());
        throw Error(ErrorCode::storage_failure,
                    "cannot move " + tmp.string() + " into place: " + rc.message());
    }
}

std::optional<std::string> read_file_if_exists(const fs::path& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return std::nullopt;
    std::string data;
    char buf[1 << 16];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) data.append(buf, n);
    std::fclose(f);
    return data;
}

// ---------------------------------------------------------------------------
// Default file-based mirror transport

namespace {

class FileMirror : public MirrorTransport {
public:
    explicit FileMirror(fs::path dir) : dir_(std::move(dir)) {}

    void write_body(const PublicationId& id, std::uint32_t version,
                    std::string_view bytes) override {
        atomic_write_file(path_of(id, version), bytes);
    }

    std::optional<std::string> read_body(const PublicationId& id,
                                         std::uint32_t version) override {
        return read_file_if_exists(path_of(id, version));
    }

private:
    fs::path path_of(const PublicationId& id, std::uint32_t version) const {
        return dir_ / encode_component(id.value()) / ("v" + std::to_string(version));
    }

    fs::path dir_;
};

}  // namespace

std::shared_ptr<MirrorTransport> make_file_mirror(fs::path dir) {
    return std::make_shared<FileMirror>(std::move(dir));
}

// ---------------------------------------------------------------------------
// Publication state

namespace {

json pub_to_json(const Registry::PubState& s);

}  // namespace

Registry::Registry(fs::path root, Options opts)
    : root_(std::move(root)), opts_(std::move(opts)), store_(root_ / "store", opts_.store) {
    if (!opts_.clock) opts_.clock = system_clock();
    mirror_ = make_file_mirror(root_ / "mirror");
}

std::unique_lock<std::mutex> Registry::writer_lock(const std::string& key) {
    std::mutex* m;
    {
        std::lock_guard lk(locks_mu_);
        auto& slot = locks_[key];
        if (!slot) slot = std::make_unique<std::mutex>();
        m = slot.get();
    }
    return std::unique_lock(*m);
}

namespace {

json pub_to_json(const Registry::PubState& s) {
    json j;
    j["id"] = s.id;
    j["meta"] = s.meta;
    j["revisions"] = s.revisions;
    j["events"] = s.events;
    if (s.last_promotion) j["last_promotion"] = *s.last_promotion;
    j["created_at"] = s.created_at;
    return j;
}

Registry::PubState pub_from_json(const json& j) {
    Registry::PubState s;
    s.id = j.at("id").get<PublicationId>();
    s.meta = j.at("meta").get<MetaAttributes>();
    s.revisions = j.at("revisions").get<std::vector<RevisionRecord>>();
    if (j.contains("events")) s.events = j.at("events").get<std::vector<HistoryEntry>>();
    if (j.contains("last_promotion")) s.last_promotion = j.at("last_promotion").get<Date>();
    s.created_at = j.at("created_at").get<Instant>();
    return s;
}

}  // namespace

std::optional<Registry::PubState> Registry::find_pub(const PublicationId& pub) const {
    auto rec = store_.find_record(kNsPublications, pub_key(pub));
    if (!rec) return std::nullopt;
    return pub_from_json(*rec);
}

Registry::PubState Registry::load_pub(const PublicationId& pub) const {
    auto s = find_pub(pub);
    if (!s)
        throw Error(ErrorCode::not_found_publication,
                    "unknown publication \"" + pub.value() + "\"");
    return *s;
}

void Registry::save_pub(const PubState& state) {
    store_.put_record(kNsPublications, pub_key(state.id), pub_to_json(state));
}

fs::path Registry::body_path(const PublicationId& pub, std::uint32_t version) const {
    return root_ / "bodies" / encode_component(pub.value()) / ("v" + std::to_string(version));
}

bool Registry::exists(const PublicationId& pub) const {
    return store_.find_record(kNsPublications, pub_key(pub)).has_value();
}

MetaAttributes Registry::meta(const PublicationId& pub) const { return load_pub(pub).meta; }

void Registry::update_meta(const PublicationId& pub, const MetaAttributes& attrs) {
    auto lock = writer_lock("pub:" + pub.value());
    PubState s = load_pub(pub);
    const bool retracted = s.meta.retracted;  // administrative, not editable here
    const auto last_rev = s.meta.last_revision_date;
    s.meta = attrs;
    s.meta.retracted = retracted;
    if (!s.meta.last_revision_date) s.meta.last_revision_date = last_rev;
    if (s.meta.first_online_year && s.meta.last_revision_date &&
        *s.meta.last_revision_date < Date{*s.meta.first_online_year, 1, 1})
        throw Error(ErrorCode::invalid_argument,
                    "last revision date precedes the first-online year");
    save_pub(s);
}

std::string Registry::body(const PublicationId& pub, std::uint32_t version) const {
    PubState s = load_pub(pub);
    if (version == 0 || version > s.revisions.size())
        throw Error(ErrorCode::not_found_version, "publication \"" + pub.value() +
                                                      "\" has no version v" +
                                                      std::to_string(version));
    auto data = read_file_if_exists(body_path(pub, version));
    if (!data)
        throw Error(ErrorCode::storage_failure,
                    "body file missing for " + pub.value() + " v" + std::to_string(version));
    return *data;
}

std::vector<PublicationId> Registry::publications() const {
    std::vector<PublicationId> out;
    for (const auto& [key, value] : store_.list_records(kNsPublications)) {
        (void)value;
        auto raw = decode_component(key);
        if (raw) out.emplace_back(*raw);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Indirection table

namespace {

json indirection_to_json(const IndirectionEntry& e) {
    json history = json::array();
    for (const auto& r : e.history)
        history.push_back(json{{"url", r.url}, {"changed_at", r.changed_at}});
    return json{{"id", e.id}, {"current_url", e.current_url}, {"history", history}};
}

IndirectionEntry indirection_from_json(const json& j) {
    IndirectionEntry e;
    e.id = j.at("id").get<PublicationId>();
    e.current_url = j.at("current_url").get<std::string>();
    for (const auto& r : j.at("history")) {
        e.history.push_back({r.at("url").get<std::string>(),
                             r.at("changed_at").get<Instant>()});
    }
    return e;
}

}  // namespace

IndirectionEntry Registry::put_url(const PublicationId& id, const std::string& url) {
    if (url.empty()) throw Error(ErrorCode::invalid_argument, "empty URL");
    auto lock = writer_lock("url:" + id.value());
    auto existing = store_.find_record(kNsIndirection, pub_key(id));
    IndirectionEntry e;
    if (existing) {
        e = indirection_from_json(*existing);
    } else {
        e.id = id;
    }
    e.current_url = url;
    e.history.push_back({url, now()});
    store_.put_record(kNsIndirection, pub_key(id), indirection_to_json(e));
    return e;
}

IndirectionEntry Registry::remap(const PublicationId& id, const std::string& new_url) {
    if (!store_.find_record(kNsIndirection, pub_key(id)))
        throw Error(ErrorCode::not_found_record,
                    "no indirection entry for \"" + id.value() + "\"");
    return put_url(id, new_url);
}

std::string Registry::resolve_id(const PublicationId& id) const {
    auto rec = store_.find_record(kNsIndirection, pub_key(id));
    if (!rec)
        throw Error(ErrorCode::not_found_record,
                    "no indirection entry for \"" + id.value() + "\"");
    return indirection_from_json(*rec).current_url;
}

std::optional<IndirectionEntry> Registry::indirection(const PublicationId& id) const {
    auto rec = store_.find_record(kNsIndirection, pub_key(id));
    if (!rec) return std::nullopt;
    return indirection_from_json(*rec);
}

// ---------------------------------------------------------------------------
// Mirror

namespace {

json mirror_to_json(const MirrorState& m) {
    return json{{"id", m.id},
                {"mirrored_version", m.mirrored_version},
                {"mirrored_hash", m.mirrored_hash},
                {"synced_at", m.synced_at},
                {"pending", m.pending}};
}

MirrorState mirror_from_json(const json& j) {
    MirrorState m;
    m.id = j.at("id").get<PublicationId>();
    m.mirrored_version = j.at("mirrored_version").get<std::uint32_t>();
    m.mirrored_hash = j.at("mirrored_hash").get<std::string>();
    m.synced_at = j.at("synced_at").get<Instant>();
    m.pending = j.value("pending", false);
    return m;
}

}  // namespace

void Registry::set_mirror_transport(std::shared_ptr<MirrorTransport> transport) {
    if (!transport) throw Error(ErrorCode::invalid_argument, "null mirror transport");
    mirror_ = std::move(transport);
}

MirrorState Registry::mirror_sync(const PublicationId& id) {
    auto lock = writer_lock("mirror:" + id.value());
    return mirror_sync_locked(id);
}

MirrorState Registry::mirror_sync_locked(const PublicationId& id) {
    PubState s = load_pub(id);
    if (s.revisions.empty())
        throw Error(ErrorCode::not_found_version,
                    "publication \"" + id.value() + "\" has no revisions");
    const RevisionRecord& latest = s.revisions.back();

    MirrorState state;
    auto rec = store_.find_record(kNsMirror, pub_key(id));
    if (rec) state = mirror_from_json(*rec);
    state.id = id;

    if (!state.pending && state.mirrored_version == latest.version &&
        state.mirrored_hash == latest.content_hash) {
        // Already in sync: refresh the sync time only.
        state.synced_at = now();
        store_.put_record(kNsMirror, pub_key(id), mirror_to_json(state));
        return state;
    }

    try {
        mirror_->write_body(id, latest.version, body(id, latest.version));
    } catch (const std::exception& ex) {
        // Durable note that this publication still owes a mirror write; the
        // previous mirror copy (if any) is untouched.
        state.pending = true;
        store_.put_record(kNsMirror, pub_key(id), mirror_to_json(state));
        throw Error(ErrorCode::remote_failure, "mirror write for \"" + id.value() +
                                                   "\" failed: " + ex.what());
    }
    state.mirrored_version = latest.version;
    state.mirrored_hash = latest.content_hash;
    state.synced_at = now();
    state.pending = false;
    store_.put_record(kNsMirror, pub_key(id), mirror_to_json(state));
    return state;
}

std::optional<MirrorState> Registry::mirror_state(const PublicationId& id) const {
    auto rec = store_.find_record(kNsMirror, pub_key(id));
    if (!rec) return std::nullopt;
    return mirror_from_json(*rec);
}

int Registry::retry_pending_mirrors() {
    int fixed = 0;
    for (const auto& [key, value] : store_.list_records(kNsMirror)) {
        if (!value.value("pending", false)) continue;
        const auto raw = decode_component(key);
        if (!raw) continue;
        try {
            mirror_sync(PublicationId(*raw));
            ++fixed;
        } catch (const Error&) {
            // still pending; caller may retry again
        }
    }
    return fixed;
}

std::optional<std::string> Registry::mirror_body(const PublicationId& id,
                                                 std::uint32_t version) const {
    return mirror_->read_body(id, version);
}

// ---------------------------------------------------------------------------
// Usage counters and reviews

void Registry::record_visit(const PublicationId& id) {
    auto lock = writer_lock("visits:" + id.value());
    const std::string key = "visits#" + pub_key(id);
    json rec = store_.find_record(kNsCounters, key).value_or(json{{"total", 0},
                                                                  {"events", json::array()}});
    rec["total"] = rec.value("total", std::uint64_t{0}) + 1;
    const Instant at = now();
    json events = json::array();
    const Date cutoff = at.date().plus_days(-kVisitRetentionDays);
    for (const auto& e : rec.value("events", json::array())) {
        auto t = parse_instant(e.get<std::string>());
        if (t && t->date() >= cutoff) events.push_back(e);
    }
    events.push_back(at.str());
    rec["events"] = events;
    store_.put_record(kNsCounters, key, rec);
}

VisitCounts Registry::visit_counts(const PublicationId& id) const {
    auto rec = store_.find_record(kNsCounters, "visits#" + pub_key(id));
    VisitCounts out;
    if (!rec) return out;
    out.total = rec->value("total", std::uint64_t{0});
    const Instant cutoff{now().secs - 30 * 86400};
    for (const auto& e : rec->value("events", json::array())) {
        auto t = parse_instant(e.get<std::string>());
        if (t && *t >= cutoff) ++out.last_30_days;
    }
    if (out.last_30_days > out.total) out.last_30_days = out.total;
    return out;
}

void Registry::record_click(const std::string& list_id, const PublicationId& id) {
    auto lock = writer_lock("clicks:" + list_id + "#" + id.value());
    const std::string key = "clicks#" + encode_component(list_id) + "#" + pub_key(id);
    json rec = store_.find_record(kNsCounters, key).value_or(json{{"total", 0}});
    rec["total"] = rec.value("total", std::uint64_t{0}) + 1;
    store_.put_record(kNsCounters, key, rec);
}

std::uint64_t Registry::click_count(const std::string& list_id, const PublicationId& id) const {
    auto rec =
        store_.find_record(kNsCounters, "clicks#" + encode_component(list_id) + "#" + pub_key(id));
    if (!rec) return 0;
    return rec->value("total", std::uint64_t{0});
}

void Registry::add_review(const PublicationId& id, const Date& reviewed_on,
                          const std::string& reviewer) {
    if (!reviewed_on.valid()) throw Error(ErrorCode::invalid_argument, "invalid review date");
    auto lock = writer_lock("reviews:" + id.value());
    json rec = store_.find_record(kNsReviews, pub_key(id)).value_or(json{{"items", json::array()}});
    rec["items"].push_back(json{{"date", reviewed_on}, {"reviewer", reviewer}});
    store_.put_record(kNsReviews, pub_key(id), rec);
}

std::vector<Date> Registry::reviews(const PublicationId& id) const {
    std::vector<Date> out;
    auto rec = store_.find_record(kNsReviews, pub_key(id));
    if (!rec) return out;
    for (const auto& item : rec->value("items", json::array()))
        out.push_back(item.at("date").get<Date>());
    return out;
}

}  // namespace alive
