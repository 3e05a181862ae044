#include "alive/api_json.hpp"

#include "alive/json_io.hpp"

namespace alive::api {

json envelope() { return json{{"schema", kSchemaVersion}}; }

json revision_fields(const RevisionRecord& rec) {
    return json{{"id", rec.pub.value()},
                {"name", format_versioned_name(VersionedName{rec.pub, rec.version})},
                {"version", rec.version},
                {"timestamp", rec.timestamp.str()},
                {"content_hash", rec.content_hash},
                {"note", rec.note},
                {"track", to_string(rec.track)},
                {"body_size", rec.body_size}};
}

json rendered_fields(const RenderedReference& ref) {
    return json{{"plain_text", ref.plain_text},
                {"markup_fragment", ref.markup_fragment},
                {"style", to_string(ref.style)},
                {"contains_living_fields", ref.contains_living_fields}};
}

json revision_response(const RevisionRecord& rec) {
    json body = envelope();
    body.update(revision_fields(rec));
    return body;
}

std::string retraction_notice(const Registry& registry, const PublicationId& id) {
    std::string note;
    for (const auto& entry : registry.history(id))
        if (entry.kind == EventKind::retraction) note = entry.note;
    if (note.empty()) return "This publication has been retracted.";
    return "This publication has been retracted: " + note;
}

json resolve_response(const Registry& registry, const RevisionRecord& rec,
                      ResolvePolicy policy) {
    const UpdateStatus status =
        registry.check_for_updates(VersionedName{rec.pub, rec.version}, policy);
    json body = envelope();
    body.update(revision_fields(rec));
    body["outdated"] = status.newer_exists;
    if (status.latest.version) body["latest_version"] = *status.latest.version;
    body["retracted"] = status.retracted;
    if (auto ind = registry.indirection(rec.pub)) body["url"] = ind->current_url;
    if (status.retracted) body["notice"] = retraction_notice(registry, rec.pub);
    return body;
}

json history_response(const Registry& registry, const PublicationId& id) {
    json entries = json::array();
    for (const auto& e : registry.history(id))
        entries.push_back(json{{"kind", to_string(e.kind)},
                               {"version", e.version},
                               {"timestamp", e.timestamp.str()},
                               {"note", e.note},
                               {"track", to_string(e.track)},
                               {"content_hash", e.content_hash}});
    json body = envelope();
    body["id"] = id.value();
    body["entries"] = entries;
    return body;
}

json check_updates_response(const Registry& registry, const std::string& name,
                            ResolvePolicy policy) {
    const UpdateStatus status = registry.check_for_updates(parse_versioned_name(name), policy);
    json body = envelope();
    body["name"] = name;
    body["newer_exists"] = status.newer_exists;
    body["latest"] = format_versioned_name(status.latest);
    if (status.latest.version) body["latest_version"] = *status.latest.version;
    body["latest_timestamp"] = status.latest_timestamp.str();
    body["retracted"] = status.retracted;
    return body;
}

json reference_response(const Registry& registry, Enricher& enricher, const PublicationId& id,
                        RefStyle style, const EnrichPolicy& policy) {
    const MetaAttributes meta = registry.meta(id);

    CitationFields fields;
    fields.title = meta.title;
    fields.authors = meta.authors;
    if (meta.doi) fields.doi = meta.doi->value();
    fields.url = meta.url;
    const EnrichmentReport report = enricher.enrich(id, fields, policy);

    RenderOptions options;
    options.style = style;
    options.alive = true;
    if (auto ind = registry.indirection(id)) options.url_override = ind->current_url;
    const RenderedReference ref = render_reference(meta, report, options);

    json body = envelope();
    body["id"] = id.value();
    body.update(rendered_fields(ref));
    body["retracted"] = meta.retracted;
    if (meta.retracted) body["notice"] = retraction_notice(registry, id);
    return body;
}

json cited_by_response(const Registry& registry, const PublicationId& id, RefStyle style) {
    RenderOptions options;
    options.style = style;
    json entries = json::array();
    for (const auto& ref : render_cited_by(id, registry, options))
        entries.push_back(rendered_fields(ref));
    json body = envelope();
    body["id"] = id.value();
    body["count"] = entries.size();
    body["entries"] = entries;
    return body;
}

json notifications_response(const std::string& citing_doc,
                            const std::vector<Notification>& notifications) {
    json items = json::array();
    for (const auto& n : notifications) items.push_back(json(n));
    json body = envelope();
    body["citing_doc"] = citing_doc;
    body["notifications"] = items;
    return body;
}

json backlink_response(const Backlink& link, bool created) {
    json body = envelope();
    body["backlink"] = json(link);
    body["created"] = created;
    return body;
}

json retract_response(const PublicationId& id) {
    json body = envelope();
    body["id"] = id.value();
    body["retracted"] = true;
    return body;
}

json click_response(const std::string& list_id, const PublicationId& id, std::uint64_t total) {
    json body = envelope();
    body["list_id"] = list_id;
    body["id"] = id.value();
    body["total"] = total;
    return body;
}

json error_response(const Error& error) {
    json body = envelope();
    body["error"] = json{{"code", to_string(error.code())}, {"message", error.what()}};
    if (error.retry_after()) body["error"]["retry_after"] = error.retry_after()->str();
    return body;
}

}  // namespace alive::api
