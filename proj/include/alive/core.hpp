#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alive/error.hpp"
#include "alive/time.hpp"

#include <nlohmann/json.hpp>

namespace alive {

using json = nlohmann::json;

/// The living-date marker delimiter, U+2248 (ALMOST EQUAL TO), as UTF-8.
inline constexpr std::string_view kMarkerDelim = "\xE2\x89\x88";

/// Stable, case-sensitive identifier of a publication. Non-empty, no
/// whitespace, and never contains the marker delimiter.
class PublicationId {
public:
    PublicationId() = default;
    explicit PublicationId(std::string value);

    const std::string& value() const { return value_; }
    auto operator<=>(const PublicationId&) const = default;

    static bool is_valid(std::string_view value);

private:
    std::string value_;
};

/// `<base>` or `<base>v<version>`; a bare name resolves to the latest
/// version under the caller's policy, a suffixed name pins a version.
/// A base should not itself end in a canonical `v<digits>` suffix: such a
/// string always parses as base + version, so a bare name ending that way
/// cannot survive a format/parse round trip.
struct VersionedName {
    PublicationId base;
    std::optional<std::uint32_t> version;
    auto operator<=>(const VersionedName&) const = default;
};

/// Splits a trailing `v<digits>` suffix iff the digits are a canonical
/// positive integer (no leading zeros, fits 32 bits) and a non-empty base
/// remains; otherwise the whole text is the base. Throws on empty or
/// otherwise invalid identifiers.
VersionedName parse_versioned_name(std::string_view text);
std::string format_versioned_name(const VersionedName& name);

enum class Track { author, official };
const char* to_string(Track track);
std::optional<Track> track_from_string(std::string_view text);

/// One immutable version of a publication.
struct RevisionRecord {
    PublicationId pub;
    std::uint32_t version = 0;
    Instant timestamp;
    std::string content_hash;  // "<algo>:<hex>", see content_hash()
    std::string note;
    Track track = Track::author;
    std::uint64_t body_size = 0;
};

/// Administrative events interleaved with revisions in the change protocol.
enum class EventKind { revision, retraction, promotion };
const char* to_string(EventKind kind);

struct HistoryEntry {
    EventKind kind = EventKind::revision;
    std::uint32_t version = 0;
    Instant timestamp;
    std::string note;
    Track track = Track::author;
    std::string content_hash;  // empty for administrative entries
};

/// Descriptive attributes of a publication. `extra` carries recognized-but-
/// auxiliary keys (venue, volume, pages, ...) and anything a document's
/// metadata block declared that we do not model.
struct MetaAttributes {
    std::string title;
    std::vector<std::string> authors;
    std::optional<int> first_online_year;
    std::optional<Date> last_revision_date;
    std::string language;  // BCP-47-ish tag, empty = unspecified
    std::optional<std::string> url;
    std::optional<PublicationId> doi;
    bool retracted = false;
    std::optional<PublicationId> translation_of;
    std::vector<PublicationId> translations;
    std::map<std::string, json> extra;

    bool operator==(const MetaAttributes&) const = default;
};

enum class RefStyle { vancouver, harvard };
const char* to_string(RefStyle style);
std::optional<RefStyle> style_from_string(std::string_view text);

/// A recorded citation of a publication by some document.
struct LivingReference {
    PublicationId target;
    Date recorded_revision_date;
    RefStyle style = RefStyle::harvard;
    std::string citing_doc;
    bool stale = false;
    std::optional<Instant> acknowledged_at;
};

/// Citation fields used when the target is not (or not only) in the local
/// registry — enough to drive link discovery and provider queries.
struct CitationFields {
    std::string title;
    std::vector<std::string> authors;
    std::optional<std::string> doi;
    std::optional<std::string> url;
};

/// Stored backlink: `citing_doc` cites `target`, recorded against the
/// target's revision date at citation (or last acknowledgement) time.
struct Backlink {
    std::string citing_doc;
    PublicationId target;
    Date recorded_revision_date;
    bool stale = false;
    std::optional<Instant> acknowledged_at;
};

/// Outbox entry telling a citing document its reference went stale.
struct Notification {
    std::string citing_doc;
    PublicationId target;
    std::uint32_t new_version = 0;
    Date new_date;
    Instant created_at;
};

/// Usage tally for a publication, raw (no robot filtering).
struct VisitCounts {
    std::uint64_t total = 0;
    std::uint64_t last_30_days = 0;
    bool operator==(const VisitCounts&) const = default;
};

/// Digest of body bytes, prefixed with the algorithm ("sha256:<hex>") so
/// the scheme can be migrated without ambiguity.
std::string content_hash(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);

/// Percent-encodes everything outside [A-Za-z0-9._-]; used wherever an
/// identifier becomes part of a file name or composite store key.
std::string encode_component(std::string_view raw);
std::optional<std::string> decode_component(std::string_view enc);

}  // namespace alive
