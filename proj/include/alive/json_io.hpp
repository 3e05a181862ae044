#pragma once

#include "alive/core.hpp"

namespace alive {

// nlohmann-style ADL serializers so domain records round-trip through the
// store and the HTTP layer with one canonical shape.

void to_json(json& j, const Date& d);
void from_json(const json& j, Date& d);

void to_json(json& j, const Instant& t);
void from_json(const json& j, Instant& t);

void to_json(json& j, const PublicationId& id);
void from_json(const json& j, PublicationId& id);

void to_json(json& j, const VersionedName& n);
void from_json(const json& j, VersionedName& n);

void to_json(json& j, const RevisionRecord& r);
void from_json(const json& j, RevisionRecord& r);

void to_json(json& j, const HistoryEntry& e);
void from_json(const json& j, HistoryEntry& e);

void to_json(json& j, const MetaAttributes& m);
void from_json(const json& j, MetaAttributes& m);

void to_json(json& j, const Backlink& b);
void from_json(const json& j, Backlink& b);

void to_json(json& j, const Notification& n);
void from_json(const json& j, Notification& n);

}  // namespace alive
