#include "alive/meta_marker.hpp"

#include <algorithm>
#include <cctype>

namespace alive {

namespace {

constexpr std::string_view kBlockOpen = "<!-- alive-meta";
constexpr std::string_view kBlockClose = "-->";
constexpr std::size_t kDelimLen = 3;   // UTF-8 bytes of U+2248
constexpr std::size_t kDateLen = 10;   // YYYY-MM-DD
constexpr std::size_t kMarkerLen = kDelimLen + kDateLen + kDelimLen;

bool date_shaped(std::string_view s) {
    if (s.size() != kDateLen) return false;
    for (std::size_t i = 0; i < kDateLen; ++i) {
        if (i == 4 || i == 7) {
            if (s[i] != '-') return false;
        } else if (s[i] < '0' || s[i] > '9') {
            return false;
        }
    }
    return true;
}

}  // namespace

ScanResult scan_living_dates(std::string_view text) {
    ScanResult out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find(kMarkerDelim, pos);
        if (open == std::string_view::npos) break;
        if (open + kMarkerLen <= text.size() &&
            text.compare(open + kDelimLen + kDateLen, kDelimLen, kMarkerDelim) == 0 &&
            date_shaped(text.substr(open + kDelimLen, kDateLen))) {
            const std::string_view body = text.substr(open + kDelimLen, kDateLen);
            if (auto date = parse_date(body)) {
                LivingDateMarker m;
                m.begin = open;
                m.end = open + kMarkerLen;
                m.date = *date;
                out.markers.push_back(m);
                pos = m.end;
                continue;
            }
            out.warnings.push_back("invalid calendar date \"" + std::string(body) +
                                   "\" in living-date marker at offset " +
                                   std::to_string(open));
        }
        // Not a marker (stray delimiter, prose use, or rejected candidate):
        // move past the opening delimiter and keep scanning.
        pos = open + kDelimLen;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metadata block

namespace {

struct BlockSpan {
    std::size_t begin = 0;  // offset of the opener
    std::size_t end = 0;    // one past the closer line's newline (or EOF)
    std::size_t body_begin = 0;
    std::size_t body_end = 0;  // the key-value line region
    bool found = false;
    bool trailing_newline = true;
};

BlockSpan find_block(const std::string& doc) {
    BlockSpan span;
    std::size_t pos = 0;
    while (true) {
        pos = doc.find(kBlockOpen, pos);
        if (pos == std::string::npos) return span;
        const bool at_line_start = pos == 0 || doc[pos - 1] == '\n';
        const std::size_t after = pos + kBlockOpen.size();
        const bool line_ends = after < doc.size() && doc[after] == '\n';
        if (at_line_start && line_ends) break;
        pos = after;
    }
    span.begin = pos;
    span.body_begin = pos + kBlockOpen.size() + 1;

    // The closer is a line that is exactly "-->".
    std::size_t line_start = span.body_begin;
    while (line_start <= doc.size()) {
        std::size_t line_end = doc.find('\n', line_start);
        const bool has_newline = line_end != std::string::npos;
        if (!has_newline) line_end = doc.size();
        const std::string_view line(doc.data() + line_start, line_end - line_start);
        if (line == kBlockClose) {
            span.found = true;
            span.body_end = line_start;
            span.end = has_newline ? line_end + 1 : line_end;
            span.trailing_newline = has_newline;
            return span;
        }
        if (!has_newline) break;
        line_start = line_end + 1;
    }
    throw Error(ErrorCode::parse_error,
                "metadata block opened at offset " + std::to_string(span.begin) +
                    " is never closed");
}

bool known_meta_key(std::string_view key) {
    static constexpr std::string_view known[] = {
        "title",      "authors",        "first_online_year", "last_revision_date",
        "language",   "url",            "doi",               "retracted",
        "translation_of", "translations", "bindings"};
    return std::find(std::begin(known), std::end(known), key) != std::end(known);
}

void apply_meta_key(ExtractedMeta& out, const std::string& key, const json& value,
                    std::size_t offset) {
    auto fail = [&](const char* expected) {
        throw Error(ErrorCode::parse_error, "metadata key \"" + key + "\" at offset " +
                                                std::to_string(offset) + " must be " +
                                                expected);
    };
    try {
        if (key == "title") {
            if (!value.is_string()) fail("a string");
            out.attrs.title = value.get<std::string>();
        } else if (key == "authors") {
            if (!value.is_array()) fail("an array of strings");
            out.attrs.authors = value.get<std::vector<std::string>>();
        } else if (key == "first_online_year") {
            if (!value.is_number_integer()) fail("an integer year");
            out.attrs.first_online_year = value.get<int>();
        } else if (key == "last_revision_date") {
            if (!value.is_string()) fail("an ISO date string");
            auto d = parse_date(value.get<std::string>());
            if (!d) fail("an ISO date string");
            out.attrs.last_revision_date = *d;
        } else if (key == "language") {
            if (!value.is_string()) fail("a string");
            out.attrs.language = value.get<std::string>();
        } else if (key == "url") {
            if (!value.is_string()) fail("a string");
            out.attrs.url = value.get<std::string>();
        } else if (key == "doi") {
            if (!value.is_string()) fail("a string");
            out.attrs.doi = PublicationId(value.get<std::string>());
        } else if (key == "retracted") {
            if (!value.is_boolean()) fail("a boolean");
            out.attrs.retracted = value.get<bool>();
        } else if (key == "translation_of") {
            if (!value.is_string()) fail("a string");
            out.attrs.translation_of = PublicationId(value.get<std::string>());
        } else if (key == "translations") {
            if (!value.is_array()) fail("an array of ids");
            for (const auto& t : value)
                out.attrs.translations.emplace_back(t.get<std::string>());
        } else if (key == "bindings") {
            if (!value.is_object()) fail("an object of marker-index → id");
            for (const auto& [idx_text, id] : value.items()) {
                std::size_t idx = 0;
                for (char c : idx_text) {
                    if (c < '0' || c > '9') fail("an object with numeric indices");
                    idx = idx * 10 + static_cast<std::size_t>(c - '0');
                }
                out.bindings[idx] = PublicationId(id.get<std::string>());
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail("well-formed");
    }
}

}  // namespace

ExtractedMeta extract_meta(const std::string& doc) {
    ExtractedMeta out;
    const BlockSpan span = find_block(doc);
    if (!span.found) return out;
    out.block_found = true;

    std::vector<std::string> seen;
    std::size_t line_start = span.body_begin;
    while (line_start < span.body_end) {
        std::size_t line_end = doc.find('\n', line_start);
        if (line_end == std::string::npos || line_end > span.body_end) line_end = span.body_end;
        const std::string_view line(doc.data() + line_start, line_end - line_start);
        const std::size_t offset = line_start;
        line_start = line_end + 1;
        if (line.empty()) continue;

        const std::size_t sep = line.find(" = ");
        if (sep == std::string_view::npos || sep == 0)
            throw Error(ErrorCode::parse_error,
                        "metadata line at offset " + std::to_string(offset) +
                            " is not of the form `key = <value>`");
        const std::string key(line.substr(0, sep));
        for (char c : key) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                            (c >= '0' && c <= '9') || c == '_';
            if (!ok)
                throw Error(ErrorCode::parse_error, "bad metadata key \"" + key +
                                                        "\" at offset " +
                                                        std::to_string(offset));
        }
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            throw Error(ErrorCode::parse_error, "duplicate metadata key \"" + key +
                                                    "\" at offset " + std::to_string(offset));
        seen.push_back(key);

        const json value = json::parse(line.substr(sep + 3), nullptr, false);
        if (value.is_discarded())
            throw Error(ErrorCode::parse_error, "metadata value for \"" + key +
                                                    "\" at offset " + std::to_string(offset) +
                                                    " is not valid JSON");
        if (known_meta_key(key))
            apply_meta_key(out, key, value, offset);
        else
            out.attrs.extra[key] = value;
    }
    return out;
}

namespace {

void emit_line(std::string& out, std::string_view key, const json& value) {
    out += key;
    out += " = ";
    out += value.dump();
    out += "\n";
}

std::string serialize_block(const MetaAttributes& attrs,
                            const std::map<std::size_t, PublicationId>& bindings) {
    std::string out;
    out += kBlockOpen;
    out += "\n";
    if (!attrs.title.empty()) emit_line(out, "title", attrs.title);
    if (!attrs.authors.empty()) emit_line(out, "authors", attrs.authors);
    if (attrs.first_online_year) emit_line(out, "first_online_year", *attrs.first_online_year);
    if (attrs.last_revision_date)
        emit_line(out, "last_revision_date", attrs.last_revision_date->str());
    if (!attrs.language.empty()) emit_line(out, "language", attrs.language);
    if (attrs.url) emit_line(out, "url", *attrs.url);
    if (attrs.doi) emit_line(out, "doi", attrs.doi->value());
    if (attrs.retracted) emit_line(out, "retracted", true);
    if (attrs.translation_of) emit_line(out, "translation_of", attrs.translation_of->value());
    if (!attrs.translations.empty()) {
        json t = json::array();
        for (const auto& id : attrs.translations) t.push_back(id.value());
        emit_line(out, "translations", t);
    }
    if (!bindings.empty()) {
        json b = json::object();
        for (const auto& [idx, id] : bindings) b[std::to_string(idx)] = id.value();
        emit_line(out, "bindings", b);
    }
    for (const auto& [key, value] : attrs.extra) {
        if (known_meta_key(key)) continue;  // modeled fields win over stray extras
        emit_line(out, key, value);
    }
    out += kBlockClose;
    return out;
}

}  // namespace

std::string embed_meta(const std::string& doc, const MetaAttributes& attrs,
                       const std::map<std::size_t, PublicationId>& bindings, bool strict) {
    const std::string block = serialize_block(attrs, bindings);
    const BlockSpan span = find_block(doc);
    if (!span.found) {
        if (strict)
            throw Error(ErrorCode::invalid_state,
                        "document has no metadata block (strict mode)");
        return block + "\n" + doc;
    }
    std::string out;
    out.reserve(doc.size() + block.size());
    out.append(doc, 0, span.begin);
    out += block;
    if (span.trailing_newline) out += "\n";
    out.append(doc, span.end, doc.size() - span.end);
    return out;
}

// ---------------------------------------------------------------------------
// Refresh

RefreshOutcome refresh_living_dates(const std::string& text,
                                    const std::map<std::size_t, PublicationId>& bindings,
                                    const LedgerDateReader& reader) {
    ScanResult scan = scan_living_dates(text);
    RefreshOutcome out;
    out.text = text;
    out.warnings = std::move(scan.warnings);
    for (const auto& [index, target] : bindings) {
        if (index >= scan.markers.size()) {
            out.unresolved.push_back("binding " + std::to_string(index) +
                                     " names no marker (document has " +
                                     std::to_string(scan.markers.size()) + ")");
            continue;
        }
        LivingDateMarker& marker = scan.markers[index];
        marker.target = target;
        std::optional<Date> current;
        if (reader) current = reader(target);
        if (!current) {
            out.unresolved.push_back("marker " + std::to_string(index) + ": target \"" +
                                     target.value() + "\" could not be resolved");
            continue;
        }
        if (*current == marker.date) continue;
        // Same-length in-place patch: only the ten date bytes change.
        out.text.replace(marker.begin + kDelimLen, kDateLen, current->str());
        ++out.changed;
    }
    return out;
}

RefreshOutcome refresh_document(const std::string& doc, const LedgerDateReader& reader) {
    const ExtractedMeta meta = extract_meta(doc);
    return refresh_living_dates(doc, meta.bindings, reader);
}

std::string format_harvard_reference(const std::string& author, int first_year,
                                     const Date& last_rev) {
    std::string out = "(" + author + ", " + std::to_string(first_year) + ", ";
    out += kMarkerDelim;
    out += last_rev.str();
    out += kMarkerDelim;
    out += ")";
    return out;
}

}  // namespace alive
