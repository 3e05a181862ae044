#pragma once

// Shared test fixtures: temp directories, a settable clock, scripted
// providers, small random-data generators, and a JSON-schema checker used
// to validate API bodies against the documents under api/.
//
// This header is doctest-free so the acceptance binary can reuse it.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "alive/core.hpp"
#include "alive/enrichment.hpp"
#include "alive/time.hpp"

namespace testutil {

using alive::json;

// ---------------------------------------------------------------------------
// Filesystem helpers

/// Self-cleaning temporary directory.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "alive-test-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed for " + tmpl);
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("short write: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Root of the source tree (for loading api/ schema documents).
inline std::filesystem::path source_root() {
#ifdef ALIVE_SOURCE_DIR
    return std::filesystem::path(ALIVE_SOURCE_DIR);
#else
    return std::filesystem::current_path();
#endif
}

// ---------------------------------------------------------------------------
// Time control

/// Settable clock shared with the code under test by value (the underlying
/// seconds cell is shared, so later adjustments are visible).
struct FakeClock {
    std::shared_ptr<std::atomic<std::int64_t>> secs;

    explicit FakeClock(const alive::Date& d = alive::Date{2021, 6, 1})
        : secs(std::make_shared<std::atomic<std::int64_t>>(alive::Instant::from_date(d).secs)) {}

    alive::Clock clock() const {
        auto cell = secs;
        return [cell] { return alive::Instant{cell->load()}; };
    }
    alive::Instant now() const { return alive::Instant{secs->load()}; }
    alive::Date today() const { return now().date(); }
    void set(const alive::Date& d) { secs->store(alive::Instant::from_date(d).secs); }
    void set(const alive::Instant& t) { secs->store(t.secs); }
    void advance_days(std::int64_t n) { secs->fetch_add(n * 86400); }
    void advance_hours(std::int64_t n) { secs->fetch_add(n * 3600); }
    void advance_secs(std::int64_t n) { secs->fetch_add(n); }
};

// ---------------------------------------------------------------------------
// Scripted provider

/// Provider whose behavior a test scripts: a fixed handler, an on/off
/// failure switch, an optional artificial delay, and a call counter.
class ScriptedProvider : public alive::Provider {
public:
    ScriptedProvider(std::string name, std::vector<alive::EnrichKind> kinds)
        : name_(std::move(name)), kinds_(std::move(kinds)) {}

    std::function<alive::ProviderResult(const alive::ProviderRequest&)> handler;
    std::atomic<bool> fail{false};
    std::atomic<int> delay_ms{0};
    std::atomic<int> calls{0};
    std::chrono::milliseconds budget_ms{1000};

    /// Last request seen (meaningful only in single-threaded test phases).
    alive::ProviderRequest last_request;

    const std::string& name() const override { return name_; }
    bool serves(alive::EnrichKind kind) const override {
        return std::find(kinds_.begin(), kinds_.end(), kind) != kinds_.end();
    }
    std::chrono::milliseconds budget() const override { return budget_ms; }
    alive::ProviderResult fetch(const alive::ProviderRequest& request) override {
        ++calls;
        last_request = request;
        if (int d = delay_ms.load(); d > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(d));
        if (fail.load()) throw std::runtime_error("scripted failure from " + name_);
        if (!handler) return {};
        return handler(request);
    }

private:
    std::string name_;
    std::vector<alive::EnrichKind> kinds_;
};

/// Provider answering one kind with a fixed JSON payload.
inline std::shared_ptr<ScriptedProvider> fixed_provider(const std::string& name,
                                                        alive::EnrichKind kind,
                                                        json value) {
    auto p = std::make_shared<ScriptedProvider>(name, std::vector<alive::EnrichKind>{kind});
    p->handler = [value = std::move(value)](const alive::ProviderRequest&) {
        alive::ProviderResult r;
        r.value = value;
        return r;
    };
    return p;
}

// ---------------------------------------------------------------------------
// Random data

/// Deterministic RNG helpers for property-style tests.
struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}

    std::uint64_t raw() { return engine(); }
    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine);
    }
    bool chance(double p) {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine) < p;
    }
    std::string pick_chars(std::string_view alphabet, std::size_t min_len, std::size_t max_len) {
        const auto len = static_cast<std::size_t>(between(static_cast<std::int64_t>(min_len),
                                                          static_cast<std::int64_t>(max_len)));
        std::string out;
        out.reserve(len);
        for (std::size_t i = 0; i < len; ++i)
            out.push_back(alphabet[static_cast<std::size_t>(
                between(0, static_cast<std::int64_t>(alphabet.size()) - 1))]);
        return out;
    }
    /// Printable ASCII text (no control bytes; valid UTF-8 by construction).
    std::string text(std::size_t min_len, std::size_t max_len) {
        static constexpr std::string_view kAlpha =
            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
            " .,;:-_()[]{}<>&\"'/\\!?#@*+=~";
        return pick_chars(kAlpha, min_len, max_len);
    }
    /// Identifier-safe token.
    std::string token(std::size_t min_len, std::size_t max_len) {
        static constexpr std::string_view kAlpha =
            "abcdefghijklmnopqrstuvwxyz0123456789._-";
        return pick_chars(kAlpha, min_len, max_len);
    }
    alive::Date date(int year_lo = 1990, int year_hi = 2030) {
        const std::int64_t lo = alive::Date{year_lo, 1, 1}.serial();
        const std::int64_t hi = alive::Date{year_hi, 12, 31}.serial();
        return alive::Date::from_serial(between(lo, hi));
    }
    /// A publication-id base that does not itself end in a canonical
    /// v<digits> suffix (so it survives a format/parse round trip).
    std::string bare_base() {
        for (;;) {
            std::string base = token(1, 24);
            if (!alive::PublicationId::is_valid(base)) continue;
            if (!alive::parse_versioned_name(base).version) return base;
        }
    }
    /// Arbitrary JSON value of bounded depth (strings are printable ASCII).
    json value(int depth = 2) {
        const int pick = static_cast<int>(between(0, depth > 0 ? 6 : 4));
        switch (pick) {
            case 0: return json(nullptr);
            case 1: return json(chance(0.5));
            case 2: return json(between(-1000000, 1000000));
            case 3: return json(between(-1000, 1000) / 8.0);
            case 4: return json(text(0, 16));
            case 5: {
                json arr = json::array();
                const int n = static_cast<int>(between(0, 3));
                for (int i = 0; i < n; ++i) arr.push_back(value(depth - 1));
                return arr;
            }
            default: {
                json obj = json::object();
                const int n = static_cast<int>(between(0, 3));
                for (int i = 0; i < n; ++i) obj[token(1, 8)] = value(depth - 1);
                return obj;
            }
        }
    }
};

// ---------------------------------------------------------------------------
// JSON-schema checking (the subset the api/ documents use)

inline void schema_errors(const json& schema, const json& value, const std::string& where,
                          std::vector<std::string>& out) {
    if (!schema.is_object()) return;

    if (schema.contains("type")) {
        auto matches = [&](const std::string& t) {
            if (t == "object") return value.is_object();
            if (t == "array") return value.is_array();
            if (t == "string") return value.is_string();
            if (t == "integer") return value.is_number_integer() || value.is_number_unsigned();
            if (t == "number") return value.is_number();
            if (t == "boolean") return value.is_boolean();
            if (t == "null") return value.is_null();
            return false;
        };
        bool ok = false;
        if (schema.at("type").is_array()) {
            for (const auto& t : schema.at("type")) ok = ok || matches(t.get<std::string>());
        } else {
            ok = matches(schema.at("type").get<std::string>());
        }
        if (!ok) {
            out.push_back(where + ": expected type " + schema.at("type").dump() + ", got " +
                          value.dump().substr(0, 120));
            return;  // further structural checks would be meaningless
        }
    }

    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& candidate : schema.at("enum")) ok = ok || candidate == value;
        if (!ok)
            out.push_back(where + ": value " + value.dump() + " not in enum " +
                          schema.at("enum").dump());
    }
    if (schema.contains("const") && schema.at("const") != value)
        out.push_back(where + ": expected const " + schema.at("const").dump() + ", got " +
                      value.dump());

    if (schema.contains("format") && value.is_string()) {
        const std::string f = schema.at("format").get<std::string>();
        const std::string s = value.get<std::string>();
        if (f == "date" && !alive::parse_date(s))
            out.push_back(where + ": not a calendar date: " + value.dump());
        if (f == "date-time" && !alive::parse_instant(s))
            out.push_back(where + ": not a UTC timestamp: " + value.dump());
    }
    if (schema.contains("minimum") && value.is_number() &&
        value.get<double>() < schema.at("minimum").get<double>())
        out.push_back(where + ": " + value.dump() + " below minimum " +
                      schema.at("minimum").dump());

    if (value.is_object()) {
        const json props = schema.value("properties", json::object());
        if (schema.contains("required"))
            for (const auto& k : schema.at("required"))
                if (!value.contains(k.get<std::string>()))
                    out.push_back(where + ": missing required key \"" + k.get<std::string>() +
                                  "\"");
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (props.contains(it.key())) {
                schema_errors(props.at(it.key()), it.value(), where + "." + it.key(), out);
            } else if (schema.contains("additionalProperties")) {
                const json& extra = schema.at("additionalProperties");
                if (extra.is_boolean() && !extra.get<bool>())
                    out.push_back(where + ": unexpected key \"" + it.key() + "\"");
                else if (extra.is_object())
                    schema_errors(extra, it.value(), where + "." + it.key(), out);
            }
        }
    }
    if (value.is_array() && schema.contains("items"))
        for (std::size_t i = 0; i < value.size(); ++i)
            schema_errors(schema.at("items"), value[i], where + "[" + std::to_string(i) + "]",
                          out);
}

inline json load_schema(const std::string& name) {
    const auto path = source_root() / "api" / (name + ".schema.json");
    return json::parse(read_file(path));
}

/// Empty string when `value` conforms to api/<name>.schema.json; otherwise
/// a newline-joined list of mismatches.
inline std::string check_against(const std::string& name, const json& value) {
    std::vector<std::string> errors;
    schema_errors(load_schema(name), value, "$", errors);
    std::string joined;
    for (const auto& e : errors) joined += (joined.empty() ? "" : "\n") + e;
    return joined;
}

}  // namespace testutil
