#include "alive/renderer.hpp"

#include <algorithm>
#include <sstream>

#include "alive/error.hpp"
#include "alive/meta_marker.hpp"
#include "alive/registry.hpp"

namespace alive {

namespace {

std::string language_name(const std::string& tag) {
    if (tag == "en") return "English";
    if (tag == "ru") return "Russian";
    if (tag == "de") return "German";
    if (tag == "fr") return "French";
    if (tag == "es") return "Spanish";
    if (tag == "it") return "Italian";
    if (tag == "zh") return "Chinese";
    if (tag == "ja") return "Japanese";
    return tag;  // unknown tags are shown verbatim
}

std::string extra_text(const MetaAttributes& meta, const std::string& key) {
    auto it = meta.extra.find(key);
    if (it == meta.extra.end()) return {};
    if (it->second.is_string()) return it->second.get<std::string>();
    return it->second.dump();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

/// One sentence of the rendered reference, with optional provenance. The
/// plain text and the markup fragment are built from the same segment list
/// so they can never disagree.
struct Segment {
    std::string text;
    std::string css_class;
    std::string source;      // provenance: who supplied a living value
    std::string fetched_at;  // provenance: when it was fetched
    bool living = false;
};

Segment living_segment(std::string text, std::string css_class, const EnrichmentEntry& from) {
    Segment s;
    s.text = std::move(text);
    s.css_class = std::move(css_class);
    s.source = from.source;
    s.fetched_at = from.fetched_at.str();
    s.living = true;
    return s;
}

std::string format_count(std::uint64_t n) { return std::to_string(n); }

}  // namespace

std::string escape_markup(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

RenderedReference render_reference(const MetaAttributes& meta, const EnrichmentReport& report,
                                   const RenderOptions& options) {
    std::vector<std::string> missing;
    if (meta.title.empty()) missing.push_back("title");
    if (meta.authors.empty()) missing.push_back("authors");
    if (!missing.empty())
        throw Error(ErrorCode::invalid_argument,
                    "cannot render reference: missing " + join(missing, ", "));

    std::vector<Segment> segments;

    // Retraction notice goes ahead of everything else. The enrichment answer
    // (when present) carries provenance; the stored meta flag alone is a
    // static author-side attribute.
    const EnrichmentEntry* retraction = report.find(EnrichKind::retraction);
    if (retraction && retraction->flag && *retraction->flag) {
        segments.push_back(living_segment("[RETRACTED]", "retraction", *retraction));
    } else if (meta.retracted) {
        segments.push_back({"[RETRACTED]", "retraction", "", "", false});
    }

    const std::string authors = join(meta.authors, ", ");
    std::string year;
    if (meta.first_online_year) year = "(" + std::to_string(*meta.first_online_year) + ").";

    if (options.style == RefStyle::harvard && !year.empty()) {
        segments.push_back({authors + " " + year, "authors", "", "", false});
    } else {
        // Initials often end the list with a period already; never double it.
        const std::string dot = authors.ends_with('.') ? "" : ".";
        segments.push_back({authors + dot, "authors", "", "", false});
    }

    segments.push_back({meta.title + ".", "title", "", "", false});

    // Which URL the reference points at: an explicit override (indirection)
    // wins, then the author-supplied URL, then a discovered link.
    std::optional<std::string> url = options.url_override;
    if (!url && meta.url) url = meta.url;
    const EnrichmentEntry* discovered = report.find(EnrichKind::discovered_link);
    if (!url && discovered && discovered->url) url = discovered->url;

    std::string venue = extra_text(meta, "venue");
    if (!venue.empty()) {
        // Shelf coordinates matter only when there is no link to follow.
        if (!url) {
            std::string vol = extra_text(meta, "volume");
            std::string issue = extra_text(meta, "issue");
            std::string pages = extra_text(meta, "pages");
            if (!vol.empty()) venue += ", vol. " + vol;
            if (!issue.empty()) venue += ", no. " + issue;
            if (!pages.empty()) venue += ", pp. " + pages;
        }
        segments.push_back({venue + ".", "venue", "", "", false});
    }

    if (options.style != RefStyle::harvard && !year.empty())
        segments.push_back({year, "year", "", "", false});

    if (!meta.language.empty() && meta.language != "en")
        segments.push_back(
            {"(In " + language_name(meta.language) + ").", "language", "", "", false});

    if (meta.doi) segments.push_back({"doi:" + meta.doi->value() + ".", "doi", "", "", false});

    // Living data suffix; segment order here is this renderer's convention.
    if (const auto* e = report.find(EnrichKind::open_access); e && e->access) {
        std::string text;
        switch (e->access->mode) {
            case AccessState::open: text = "Access: open."; break;
            case AccessState::embargoed:
                text = "Access: embargoed";
                if (e->access->embargo_until)
                    text += " until " + e->access->embargo_until->str();
                text += ".";
                break;
            case AccessState::closed: text = "Access: closed."; break;
            case AccessState::unknown: break;
        }
        if (!text.empty()) segments.push_back(living_segment(text, "access", *e));
    }
    if (const auto* e = report.find(EnrichKind::citation_count); e && !e->citations.empty()) {
        std::vector<std::string> parts;
        for (const auto& c : e->citations)
            parts.push_back(format_count(c.count) + " (" + c.source + ")");
        segments.push_back(living_segment("Cited: " + join(parts, ", ") + ".", "citations", *e));
    }
    if (const auto* e = report.find(EnrichKind::visit_counts); e && e->visits) {
        segments.push_back(living_segment("Visits: " + format_count(e->visits->total) +
                                              " (30 days: " +
                                              format_count(e->visits->last_30_days) + ").",
                                          "visits", *e));
    }
    if (const auto* e = report.find(EnrichKind::click_count); e && e->count)
        segments.push_back(
            living_segment("Clicks: " + format_count(*e->count) + ".", "clicks", *e));
    if (const auto* e = report.find(EnrichKind::bookmark_count); e && e->count)
        segments.push_back(
            living_segment("Bookmarks: " + format_count(*e->count) + ".", "bookmarks", *e));
    if (const auto* e = report.find(EnrichKind::translations); e && !e->related.empty()) {
        std::vector<std::string> ids;
        for (const auto& t : e->related) ids.push_back(t.value());
        segments.push_back(
            living_segment("Translations: " + join(ids, ", ") + ".", "translations", *e));
    }
    if (const auto* e = report.find(EnrichKind::recent_review); e && e->flag && *e->flag)
        segments.push_back(living_segment("Recently reviewed.", "reviewed", *e));

    // The alive signature: the living last-revision date, right before the
    // URL. Its provenance is the ledger; the revision date itself is the
    // authoritative timestamp of the value.
    bool marker_emitted = false;
    if (options.alive && meta.last_revision_date) {
        Segment s;
        s.text = "Last updated " + std::string(kMarkerDelim) + meta.last_revision_date->str() +
                 std::string(kMarkerDelim) + ".";
        s.css_class = "last-updated";
        s.source = "ledger";
        s.fetched_at = Instant::from_date(*meta.last_revision_date).str();
        s.living = true;
        segments.push_back(std::move(s));
        marker_emitted = true;
    }

    // A broken link gets a visible mark; the URL itself always stays.
    const EnrichmentEntry* link = report.find(EnrichKind::link_status);
    if (url && link && link->link && link->link->state == LinkState::broken)
        segments.push_back(living_segment("[broken link]", "link-mark", *link));

    RenderedReference out;
    out.style = options.style;

    std::ostringstream plain;
    std::ostringstream markup;
    markup << "<span class=\"alive-ref\" data-style=\"" << to_string(options.style) << "\">";
    bool first = true;
    for (const auto& seg : segments) {
        if (!first) plain << " ";
        plain << seg.text;
        if (!first) markup << " ";
        markup << "<span class=\"" << (seg.living ? "living " : "") << seg.css_class << "\"";
        if (seg.living)
            markup << " data-source=\"" << escape_markup(seg.source) << "\" data-fetched-at=\""
                   << seg.fetched_at << "\"";
        markup << ">" << escape_markup(seg.text) << "</span>";
        if (seg.living) out.contains_living_fields = true;
        first = false;
    }
    if (url) {
        if (!first) {
            plain << " ";
            markup << " ";
        }
        plain << "<" << *url << ">";
        markup << "<a class=\"url\" href=\"" << escape_markup(*url) << "\"";
        if (link && link->link) {
            markup << " data-link-state=\"" << to_string(link->link->state)
                   << "\" data-source=\"" << escape_markup(link->source)
                   << "\" data-fetched-at=\"" << link->fetched_at.str() << "\"";
            out.contains_living_fields = true;
        }
        markup << ">" << escape_markup(*url) << "</a>";
    }
    markup << "</span>";

    out.plain_text = plain.str();
    out.markup_fragment = markup.str();
    if (marker_emitted) out.contains_living_fields = true;
    return out;
}

std::string render_intext(RefStyle style, const std::string& author,
                          std::optional<int> first_year, std::optional<Date> last_rev,
                          std::optional<int> number) {
    if (style == RefStyle::vancouver) {
        if (!number)
            throw Error(ErrorCode::invalid_argument,
                        "vancouver in-text reference requires a number");
        return "[" + std::to_string(*number) + "]";
    }
    if (author.empty() || !first_year)
        throw Error(ErrorCode::invalid_argument,
                    "harvard in-text reference requires an author and a first year");
    if (last_rev) return format_harvard_reference(author, *first_year, *last_rev);
    return "(" + author + ", " + std::to_string(*first_year) + ")";
}

std::vector<RenderedReference> render_cited_by(const PublicationId& id, const Registry& registry,
                                               const RenderOptions& options) {
    std::vector<Backlink> links = registry.backlinks_of(id);
    std::sort(links.begin(), links.end(), [](const Backlink& a, const Backlink& b) {
        if (a.recorded_revision_date.serial() != b.recorded_revision_date.serial())
            return a.recorded_revision_date.serial() > b.recorded_revision_date.serial();
        return a.citing_doc < b.citing_doc;
    });

    std::vector<RenderedReference> out;
    out.reserve(links.size());
    for (const auto& link : links) {
        std::optional<MetaAttributes> meta;
        std::optional<std::string> current_url;
        if (PublicationId::is_valid(link.citing_doc)) {
            const PublicationId citing(link.citing_doc);
            if (registry.exists(citing)) {
                MetaAttributes m = registry.meta(citing);
                if (!m.title.empty() && !m.authors.empty()) {
                    meta = std::move(m);
                    if (auto ind = registry.indirection(citing))
                        current_url = ind->current_url;
                }
            }
        }
        if (meta) {
            RenderOptions per = options;
            per.alive = true;
            per.url_override = current_url ? current_url : options.url_override;
            if (!current_url) per.url_override.reset();
            out.push_back(render_reference(*meta, EnrichmentReport{}, per));
        } else {
            // All we know about this citing document is its identifier.
            RenderedReference bare;
            bare.style = options.style;
            bare.plain_text = link.citing_doc;
            bare.markup_fragment = "<span class=\"alive-ref\"><span class=\"doc\">" +
                                   escape_markup(link.citing_doc) + "</span></span>";
            out.push_back(std::move(bare));
        }
    }
    return out;
}

}  // namespace alive
