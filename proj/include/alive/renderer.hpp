#pragma once

#include <optional>
#include <string>
#include <vector>

#include "alive/core.hpp"
#include "alive/enrichment.hpp"

namespace alive {

class Registry;

/// A bibliographic reference rendered for display.
///
/// `markup_fragment` is plain structured web markup (class-annotated spans,
/// no styling). Every living value in it carries machine-readable
/// provenance: `data-source` and `data-fetched-at` attributes.
struct RenderedReference {
    std::string plain_text;
    std::string markup_fragment;
    RefStyle style = RefStyle::harvard;
    bool contains_living_fields = false;
};

struct RenderOptions {
    RefStyle style = RefStyle::harvard;
    /// Whether the target is an alive publication. Alive targets whose meta
    /// carries a last-revision date get the trailing `Last updated ≈date≈.`
    /// segment (and that is the only way the marker enters the output).
    bool alive = true;
    /// Overrides the displayed URL (typically the indirection table's
    /// current URL, so stored references survive address changes).
    std::optional<std::string> url_override;
};

/// Composes meta-attributes with enrichment data into a rendered reference.
/// Deterministic: a pure function of its inputs, suitable for golden files.
///
/// Layout (segments in order, each a sentence):
///   [RETRACTED] — authors — title — venue (volume/issue/pages only when no
///   URL is available) — (year) — (In <Language>) — living segments (access,
///   citations per source, visits, clicks, bookmarks, translations, recent
///   review) — `Last updated ≈date≈.` — `<url>`.
/// Harvard moves the year next to the authors; Vancouver keeps it after the
/// venue. A broken link is marked, never dropped.
///
/// Throws invalid_argument naming the missing fields when title or authors
/// are absent.
RenderedReference render_reference(const MetaAttributes& meta, const EnrichmentReport& report,
                                   const RenderOptions& options = RenderOptions{});

/// In-text citation. Vancouver needs `number` and yields `[<number>]`,
/// identical for alive and static targets. Harvard needs `author` and
/// `first_year`; with `last_rev` it yields the extended triple
/// `(<author>, <year>, ≈<date>≈)`, without it the plain pair.
/// Throws invalid_argument on a style/field mismatch.
std::string render_intext(RefStyle style, const std::string& author,
                          std::optional<int> first_year, std::optional<Date> last_rev,
                          std::optional<int> number);

/// Builds the reverse ("cited by") list for a publication: one rendered
/// reference per registered citing document, newest first by the citing
/// document's recorded revision date (ties broken by document id). Citing
/// documents that are themselves alive publications in the registry render
/// with their own meta — marker included; anything else renders as a bare
/// document identifier. Empty list when nothing cites the target.
std::vector<RenderedReference> render_cited_by(const PublicationId& id, const Registry& registry,
                                               const RenderOptions& options = RenderOptions{});

/// Escapes `&<>"` for embedding text in markup.
std::string escape_markup(std::string_view text);

}  // namespace alive
