#pragma once

// Internal: the persisted per-publication state shared by the Registry's
// translation units. Not part of the public API.

#include <optional>
#include <vector>

#include "alive/registry.hpp"

namespace alive {

struct Registry::PubState {
    PublicationId id;
    MetaAttributes meta;
    std::vector<RevisionRecord> revisions;
    std::vector<HistoryEntry> events;  // administrative entries only
    std::optional<Date> last_promotion;
    Instant created_at;
};

}  // namespace alive
