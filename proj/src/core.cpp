#include "alive/core.hpp"

#include <cctype>

#include <sodium.h>

namespace alive {

namespace {

bool ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

bool PublicationId::is_valid(std::string_view value) {
    if (value.empty()) return false;
    for (char c : value)
        if (ascii_space(c)) return false;
    return value.find(kMarkerDelim) == std::string_view::npos;
}

PublicationId::PublicationId(std::string value) : value_(std::move(value)) {
    if (!is_valid(value_))
        throw Error(ErrorCode::invalid_argument,
                    "publication id must be non-empty, without whitespace or '≈': \"" +
                        value_ + "\"");
}

VersionedName parse_versioned_name(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::parse_error, "empty publication name");
    // A trailing v<digits> counts as a version suffix only when the digits
    // are the canonical decimal form of an integer >= 1.
    const auto vpos = text.rfind('v');
    if (vpos != std::string_view::npos && vpos > 0 && vpos + 1 < text.size()) {
        const std::string_view digits = text.substr(vpos + 1);
        bool all_digits = true;
        for (char c : digits)
            if (c < '0' || c > '9') all_digits = false;
        if (all_digits && digits[0] != '0' && digits.size() <= 10) {
            std::uint64_t v = 0;
            for (char c : digits) v = v * 10 + static_cast<std::uint64_t>(c - '0');
            if (v >= 1 && v <= 0xffffffffULL)
                return VersionedName{PublicationId(std::string(text.substr(0, vpos))),
                                     static_cast<std::uint32_t>(v)};
        }
    }
    return VersionedName{PublicationId(std::string(text)), std::nullopt};
}

std::string format_versioned_name(const VersionedName& name) {
    if (!name.version) return name.base.value();
    return name.base.value() + "v" + std::to_string(*name.version);
}

const char* to_string(Track track) {
    return track == Track::official ? "official" : "author";
}

std::optional<Track> track_from_string(std::string_view text) {
    if (text == "official") return Track::official;
    if (text == "author") return Track::author;
    return std::nullopt;
}

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::revision: return "revision";
        case EventKind::retraction: return "retraction";
        case EventKind::promotion: return "promotion";
    }
    return "revision";
}

const char* to_string(RefStyle style) {
    return style == RefStyle::vancouver ? "vancouver" : "harvard";
}

std::optional<RefStyle> style_from_string(std::string_view text) {
    if (text == "vancouver") return RefStyle::vancouver;
    if (text == "harvard") return RefStyle::harvard;
    return std::nullopt;
}

std::string sha256_hex(std::string_view bytes) {
    static const int init_rc = sodium_init();
    if (init_rc < 0) throw Error(ErrorCode::storage_failure, "crypto library failed to initialize");
    unsigned char digest[crypto_hash_sha256_BYTES];
    crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(bytes.data()),
                       bytes.size());
    static const char* hexd = "0123456789abcdef";
    std::string out;
    out.reserve(sizeof digest * 2);
    for (unsigned char b : digest) {
        out.push_back(hexd[b >> 4]);
        out.push_back(hexd[b & 0xf]);
    }
    return out;
}

std::string content_hash(std::string_view bytes) { return "sha256:" + sha256_hex(bytes); }

std::string encode_component(std::string_view raw) {
    static const char* hexd = "0123456789ABCDEF";
    std::string out;
    out.reserve(raw.size());
    for (unsigned char c : raw) {
        const bool keep = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                          (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        if (keep) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hexd[c >> 4]);
            out.push_back(hexd[c & 0xf]);
        }
    }
    return out;
}

std::optional<std::string> decode_component(std::string_view enc) {
    auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(enc.size());
    for (size_t i = 0; i < enc.size(); ++i) {
        if (enc[i] != '%') {
            out.push_back(enc[i]);
            continue;
        }
        if (i + 2 >= enc.size()) return std::nullopt;
        const int hi = hex(enc[i + 1]), lo = hex(enc[i + 2]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
    }
    return out;
}

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::not_found_publication: return "not_found_publication";
        case ErrorCode::not_found_version: return "not_found_version";
        case ErrorCode::not_found_record: return "not_found_record";
        case ErrorCode::not_found_backlink: return "not_found_backlink";
        case ErrorCode::rate_limited: return "rate_limited";
        case ErrorCode::invalid_state: return "invalid_state";
        case ErrorCode::storage_failure: return "storage_failure";
        case ErrorCode::corruption: return "corruption";
        case ErrorCode::provider_failure: return "provider_failure";
        case ErrorCode::remote_failure: return "remote_failure";
    }
    return "error";
}

}  // namespace alive
