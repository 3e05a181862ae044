#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alive/core.hpp"

namespace alive {

/// One well-formed living-date marker found in a document: the byte span
/// covering `≈YYYY-MM-DD≈` (delimiters included) and the parsed date.
struct LivingDateMarker {
    std::size_t begin = 0;  // offset of the opening delimiter
    std::size_t end = 0;    // one past the closing delimiter
    Date date;
    std::optional<PublicationId> target;  // set when a binding names one
};

struct ScanResult {
    std::vector<LivingDateMarker> markers;  // document order, non-overlapping
    std::vector<std::string> warnings;      // malformed candidates, with offsets
};

/// Finds every `≈YYYY-MM-DD≈` token (delimiter is exactly U+2248). A
/// candidate with date-shaped content between two delimiters but an invalid
/// calendar date is skipped and reported as a warning; stray delimiters in
/// prose are ignored. Total function: never throws.
ScanResult scan_living_dates(std::string_view text);

/// Result of reading a document's metadata block.
struct ExtractedMeta {
    MetaAttributes attrs;  // unrecognized keys land in attrs.extra
    bool block_found = false;
    /// Marker binding table: index of a living-date marker (document order,
    /// as produced by scan_living_dates) → the publication it tracks.
    std::map<std::size_t, PublicationId> bindings;
};

/// Parses the document's metadata block: a fenced comment
///
///   <!-- alive-meta
///   key = <json-value>
///   -->
///
/// with one key per line. A document without a block yields empty
/// attributes; a malformed block throws a parse error naming the offset.
ExtractedMeta extract_meta(const std::string& doc);

/// Serializes `attrs` (+ optional marker bindings) into the document's
/// metadata block, replacing an existing block in place or — in lenient
/// mode — creating one at the document head. Every byte outside the block
/// is preserved. Strict mode requires an existing block.
std::string embed_meta(const std::string& doc, const MetaAttributes& attrs,
                       const std::map<std::size_t, PublicationId>& bindings = {},
                       bool strict = false);

/// Read-only view of the ledger used by refresh: current last-revision
/// date of a publication, or nullopt when it cannot be resolved.
using LedgerDateReader = std::function<std::optional<Date>(const PublicationId&)>;

struct RefreshOutcome {
    std::string text;
    int changed = 0;                      // markers rewritten
    std::vector<std::string> unresolved;  // bindings that could not be served
    std::vector<std::string> warnings;    // scan warnings, passed through
};

/// Rewrites each bound marker's date to its target's current last-revision
/// date. Unbound markers and every byte outside marker spans stay
/// untouched; a marker whose target cannot be resolved is left as-is and
/// reported. Idempotent for a fixed ledger state.
RefreshOutcome refresh_living_dates(const std::string& text,
                                    const std::map<std::size_t, PublicationId>& bindings,
                                    const LedgerDateReader& reader);

/// Convenience for whole documents: bindings come from the document's own
/// metadata block.
RefreshOutcome refresh_document(const std::string& doc, const LedgerDateReader& reader);

/// `(<author>, <first_year>, ≈<date>≈)` — the extended in-text form whose
/// scan always yields exactly one marker.
std::string format_harvard_reference(const std::string& author, int first_year,
                                     const Date& last_rev);

}  // namespace alive
