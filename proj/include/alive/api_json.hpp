#pragma once

#include <string>
#include <vector>

#include "alive/core.hpp"
#include "alive/enrichment.hpp"
#include "alive/registry.hpp"
#include "alive/renderer.hpp"

namespace alive::api {

/// Schema tag carried by every response body ("schema" field).
inline constexpr const char* kSchemaVersion = "alive.v1";

/// `{"schema": "alive.v1"}` — the base of every response body.
json envelope();

// Body builders shared by the HTTP service and the CLI's --json output, so
// both emit identical shapes. Builders return complete bodies (schema
// included); the service adds transport concerns (status codes, headers).
json revision_fields(const RevisionRecord& rec);
json rendered_fields(const RenderedReference& ref);

json revision_response(const RevisionRecord& rec);
/// Resolve answer for an already-resolved revision: record fields plus
/// outdated/latest/retracted (and the indirection URL when one exists).
json resolve_response(const Registry& registry, const RevisionRecord& rec,
                      ResolvePolicy policy);
json history_response(const Registry& registry, const PublicationId& id);
json check_updates_response(const Registry& registry, const std::string& name,
                            ResolvePolicy policy);
/// Enriches and renders one reference (meta must exist). Sets "retracted"
/// and, for retracted targets, a human-readable "notice".
json reference_response(const Registry& registry, Enricher& enricher, const PublicationId& id,
                        RefStyle style, const EnrichPolicy& policy);
json cited_by_response(const Registry& registry, const PublicationId& id, RefStyle style);
json notifications_response(const std::string& citing_doc,
                            const std::vector<Notification>& notifications);
json backlink_response(const Backlink& link, bool created);
json retract_response(const PublicationId& id);
json click_response(const std::string& list_id, const PublicationId& id, std::uint64_t total);
json error_response(const Error& error);

/// The latest retraction note from the history, phrased for display.
std::string retraction_notice(const Registry& registry, const PublicationId& id);

}  // namespace alive::api
