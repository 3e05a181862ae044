#include "alive/json_io.hpp"

namespace alive {

namespace {

Date require_date(const json& j, const char* what) {
    auto d = parse_date(j.get<std::string>());
    if (!d) throw Error(ErrorCode::parse_error, std::string("bad date in ") + what);
    return *d;
}

Instant require_instant(const json& j, const char* what) {
    auto t = parse_instant(j.get<std::string>());
    if (!t) throw Error(ErrorCode::parse_error, std::string("bad instant in ") + what);
    return *t;
}

}  // namespace

void to_json(json& j, const Date& d) { j = d.str(); }
void from_json(const json& j, Date& d) { d = require_date(j, "date"); }

void to_json(json& j, const Instant& t) { j = t.str(); }
void from_json(const json& j, Instant& t) { t = require_instant(j, "instant"); }

void to_json(json& j, const PublicationId& id) { j = id.value(); }
void from_json(const json& j, PublicationId& id) { id = PublicationId(j.get<std::string>()); }

void to_json(json& j, const VersionedName& n) { j = format_versioned_name(n); }
void from_json(const json& j, VersionedName& n) {
    n = parse_versioned_name(j.get<std::string>());
}

void to_json(json& j, const RevisionRecord& r) {
    j = json{{"pub", r.pub},
             {"version", r.version},
             {"timestamp", r.timestamp},
             {"content_hash", r.content_hash},
             {"note", r.note},
             {"track", to_string(r.track)},
             {"body_size", r.body_size}};
}

void from_json(const json& j, RevisionRecord& r) {
    r.pub = j.at("pub").get<PublicationId>();
    r.version = j.at("version").get<std::uint32_t>();
    r.timestamp = j.at("timestamp").get<Instant>();
    r.content_hash = j.at("content_hash").get<std::string>();
    r.note = j.value("note", std::string());
    auto track = track_from_string(j.value("track", "author"));
    if (!track) throw Error(ErrorCode::parse_error, "bad track in revision record");
    r.track = *track;
    r.body_size = j.value("body_size", std::uint64_t{0});
}

void to_json(json& j, const HistoryEntry& e) {
    j = json{{"kind", to_string(e.kind)},
             {"version", e.version},
             {"timestamp", e.timestamp},
             {"note", e.note},
             {"track", to_string(e.track)}};
    if (!e.content_hash.empty()) j["content_hash"] = e.content_hash;
}

void from_json(const json& j, HistoryEntry& e) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "revision")
        e.kind = EventKind::revision;
    else if (kind == "retraction")
        e.kind = EventKind::retraction;
    else if (kind == "promotion")
        e.kind = EventKind::promotion;
    else
        throw Error(ErrorCode::parse_error, "bad history entry kind \"" + kind + "\"");
    e.version = j.at("version").get<std::uint32_t>();
    e.timestamp = j.at("timestamp").get<Instant>();
    e.note = j.value("note", std::string());
    auto track = track_from_string(j.value("track", "author"));
    if (!track) throw Error(ErrorCode::parse_error, "bad track in history entry");
    e.track = *track;
    e.content_hash = j.value("content_hash", std::string());
}

void to_json(json& j, const MetaAttributes& m) {
    j = json::object();
    j["title"] = m.title;
    j["authors"] = m.authors;
    if (m.first_online_year) j["first_online_year"] = *m.first_online_year;
    if (m.last_revision_date) j["last_revision_date"] = *m.last_revision_date;
    if (!m.language.empty()) j["language"] = m.language;
    if (m.url) j["url"] = *m.url;
    if (m.doi) j["doi"] = *m.doi;
    j["retracted"] = m.retracted;
    if (m.translation_of) j["translation_of"] = *m.translation_of;
    if (!m.translations.empty()) j["translations"] = m.translations;
    if (!m.extra.empty()) j["extra"] = m.extra;
}

void from_json(const json& j, MetaAttributes& m) {
    m = MetaAttributes{};
    m.title = j.value("title", std::string());
    if (j.contains("authors")) m.authors = j.at("authors").get<std::vector<std::string>>();
    if (j.contains("first_online_year")) m.first_online_year = j.at("first_online_year").get<int>();
    if (j.contains("last_revision_date"))
        m.last_revision_date = j.at("last_revision_date").get<Date>();
    m.language = j.value("language", std::string());
    if (j.contains("url")) m.url = j.at("url").get<std::string>();
    if (j.contains("doi")) m.doi = j.at("doi").get<PublicationId>();
    m.retracted = j.value("retracted", false);
    if (j.contains("translation_of"))
        m.translation_of = j.at("translation_of").get<PublicationId>();
    if (j.contains("translations"))
        m.translations = j.at("translations").get<std::vector<PublicationId>>();
    if (j.contains("extra"))
        m.extra = j.at("extra").get<std::map<std::string, json>>();
}

void to_json(json& j, const Backlink& b) {
    j = json{{"citing_doc", b.citing_doc},
             {"target", b.target},
             {"recorded_revision_date", b.recorded_revision_date},
             {"stale", b.stale}};
    if (b.acknowledged_at) j["acknowledged_at"] = *b.acknowledged_at;
}

void from_json(const json& j, Backlink& b) {
    b.citing_doc = j.at("citing_doc").get<std::string>();
    b.target = j.at("target").get<PublicationId>();
    b.recorded_revision_date = j.at("recorded_revision_date").get<Date>();
    b.stale = j.value("stale", false);
    b.acknowledged_at.reset();
    if (j.contains("acknowledged_at")) b.acknowledged_at = j.at("acknowledged_at").get<Instant>();
}

void to_json(json& j, const Notification& n) {
    j = json{{"citing_doc", n.citing_doc},
             {"target", n.target},
             {"new_version", n.new_version},
             {"new_date", n.new_date},
             {"created_at", n.created_at}};
}

void from_json(const json& j, Notification& n) {
    n.citing_doc = j.at("citing_doc").get<std::string>();
    n.target = j.at("target").get<PublicationId>();
    n.new_version = j.at("new_version").get<std::uint32_t>();
    n.new_date = j.at("new_date").get<Date>();
    n.created_at = j.at("created_at").get<Instant>();
}

}  // namespace alive
