#include "alive/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "alive/error.hpp"

namespace alive {

using nlohmann::json;

const char* to_string(RefreshPolicy::Mode mode) {
    switch (mode) {
        case RefreshPolicy::Mode::on_the_fly: return "on_the_fly";
        case RefreshPolicy::Mode::nightly: return "nightly";
    }
    return "?";
}

std::optional<RefreshPolicy::Mode> refresh_mode_from_string(std::string_view text) {
    if (text == "on_the_fly") return RefreshPolicy::Mode::on_the_fly;
    if (text == "nightly") return RefreshPolicy::Mode::nightly;
    return std::nullopt;
}

std::optional<int> parse_time_of_day(std::string_view text) {
    if (text.size() != 5 || text[2] != ':') return std::nullopt;
    for (std::size_t i : {0u, 1u, 3u, 4u})
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
    const int hh = (text[0] - '0') * 10 + (text[1] - '0');
    const int mm = (text[3] - '0') * 10 + (text[4] - '0');
    if (hh > 23 || mm > 59) return std::nullopt;
    return hh * 60 + mm;
}

std::string format_time_of_day(int minutes) {
    char buf[6];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

EnvReader system_env() {
    return [](const char* name) -> const char* { return std::getenv(name); };
}

namespace {

[[noreturn]] void bad_config(const std::string& what) {
    throw Error(ErrorCode::parse_error, "config: " + what);
}

void expect_keys(const json& obj, const std::vector<std::string>& allowed,
                 const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            bad_config("unknown key \"" + it.key() + "\" in " + where);
    }
}

std::string require_string(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.at(key).is_string()) bad_config("\"" + key + "\" in " + where + " must be a string");
    return obj.at(key).get<std::string>();
}

HttpProviderSpec provider_from_json(const json& p, std::size_t index) {
    const std::string where = "providers[" + std::to_string(index) + "]";
    if (!p.is_object()) bad_config(where + " must be an object");
    expect_keys(p, {"name", "kinds", "base_url", "timeout_ms"}, where);
    if (!p.contains("name") || !p.contains("kinds") || !p.contains("base_url"))
        bad_config(where + " needs name, kinds and base_url");
    HttpProviderSpec spec;
    spec.name = require_string(p, "name", where);
    spec.base_url = require_string(p, "base_url", where);
    if (spec.name.empty()) bad_config(where + ".name must not be empty");
    if (!p.at("kinds").is_array() || p.at("kinds").empty())
        bad_config(where + ".kinds must be a non-empty array");
    for (const auto& k : p.at("kinds")) {
        if (!k.is_string()) bad_config(where + ".kinds entries must be strings");
        auto kind = enrich_kind_from_string(k.get<std::string>());
        if (!kind) bad_config(where + ".kinds: unknown kind \"" + k.get<std::string>() + "\"");
        spec.kinds.push_back(*kind);
    }
    if (p.contains("timeout_ms")) {
        if (!p.at("timeout_ms").is_number_integer() || p.at("timeout_ms").get<int>() <= 0)
            bad_config(where + ".timeout_ms must be a positive integer");
        spec.timeout_ms = p.at("timeout_ms").get<int>();
    }
    return spec;
}

}  // namespace

ServiceConfig config_from_json(const json& doc) {
    if (!doc.is_object()) bad_config("top level must be an object");
    expect_keys(doc,
                {"store_path", "bind_address", "port", "auth_token", "refresh", "promotion",
                 "providers", "review_window_days"},
                "config");

    ServiceConfig config;
    if (doc.contains("store_path")) config.store_path = require_string(doc, "store_path", "config");
    if (doc.contains("bind_address"))
        config.bind_address = require_string(doc, "bind_address", "config");
    if (doc.contains("port")) {
        if (!doc.at("port").is_number_integer()) bad_config("\"port\" must be an integer");
        const int port = doc.at("port").get<int>();
        if (port < 1 || port > 65535) bad_config("\"port\" must be in 1..65535");
        config.port = port;
    }
    if (doc.contains("auth_token")) config.auth_token = require_string(doc, "auth_token", "config");

    if (doc.contains("refresh")) {
        const json& r = doc.at("refresh");
        if (!r.is_object()) bad_config("\"refresh\" must be an object");
        expect_keys(r, {"mode", "nightly_at", "ttl_hours"}, "refresh");
        if (r.contains("mode")) {
            auto mode = refresh_mode_from_string(require_string(r, "mode", "refresh"));
            if (!mode) bad_config("refresh.mode must be \"on_the_fly\" or \"nightly\"");
            config.refresh.mode = *mode;
        }
        if (r.contains("nightly_at")) {
            auto minutes = parse_time_of_day(require_string(r, "nightly_at", "refresh"));
            if (!minutes) bad_config("refresh.nightly_at must be \"HH:MM\" (24-hour, UTC)");
            config.refresh.nightly_at_minutes = *minutes;
        }
        if (r.contains("ttl_hours")) {
            if (!r.at("ttl_hours").is_number_integer() || r.at("ttl_hours").get<int>() < 1)
                bad_config("refresh.ttl_hours must be a positive integer");
            config.refresh.ttl_hours = r.at("ttl_hours").get<int>();
        }
    }
    // A nightly run happens once a day; a shorter TTL would expire values
    // with no one around to refresh them.
    if (config.refresh.mode == RefreshPolicy::Mode::nightly && config.refresh.ttl_hours < 24)
        bad_config("nightly refresh requires ttl_hours >= 24 (runs are a day apart)");

    if (doc.contains("promotion")) {
        const json& p = doc.at("promotion");
        if (!p.is_object()) bad_config("\"promotion\" must be an object");
        expect_keys(p, {"min_interval_days"}, "promotion");
        if (p.contains("min_interval_days")) {
            if (!p.at("min_interval_days").is_number_integer() ||
                p.at("min_interval_days").get<int>() < 0)
                bad_config("promotion.min_interval_days must be a non-negative integer");
            config.promotion.min_interval_days = p.at("min_interval_days").get<int>();
        }
    }

    if (doc.contains("providers")) {
        if (!doc.at("providers").is_array()) bad_config("\"providers\" must be an array");
        std::size_t i = 0;
        for (const auto& p : doc.at("providers")) config.providers.push_back(provider_from_json(p, i++));
    }

    if (doc.contains("review_window_days")) {
        if (!doc.at("review_window_days").is_number_integer() ||
            doc.at("review_window_days").get<int>() < 1)
            bad_config("\"review_window_days\" must be a positive integer");
        config.review_window_days = doc.at("review_window_days").get<int>();
    }
    return config;
}

json config_to_json(const ServiceConfig& config) {
    json providers = json::array();
    for (const auto& p : config.providers) {
        json kinds = json::array();
        for (EnrichKind k : p.kinds) kinds.push_back(to_string(k));
        providers.push_back({{"name", p.name},
                             {"kinds", kinds},
                             {"base_url", p.base_url},
                             {"timeout_ms", p.timeout_ms}});
    }
    return json{{"store_path", config.store_path},
                {"bind_address", config.bind_address},
                {"port", config.port},
                {"auth_token", config.auth_token},
                {"refresh",
                 {{"mode", to_string(config.refresh.mode)},
                  {"nightly_at", format_time_of_day(config.refresh.nightly_at_minutes)},
                  {"ttl_hours", config.refresh.ttl_hours}}},
                {"promotion", {{"min_interval_days", config.promotion.min_interval_days}}},
                {"providers", providers},
                {"review_window_days", config.review_window_days}};
}

ServiceConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::storage_failure, "cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error,
                    "config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

void apply_env_overrides(ServiceConfig& config, const EnvReader& env) {
    if (const char* store = env("ALIVE_STORE_PATH"); store && *store)
        config.store_path = store;
    if (const char* bind = env("ALIVE_BIND"); bind && *bind) {
        const std::string value = bind;
        const auto colon = value.rfind(':');
        const bool has_port = colon != std::string::npos && colon + 1 < value.size() &&
                              value.find_first_not_of("0123456789", colon + 1) == std::string::npos;
        if (has_port) {
            const std::string port_text = value.substr(colon + 1);
            const long port = std::strtol(port_text.c_str(), nullptr, 10);
            if (port < 1 || port > 65535)
                throw Error(ErrorCode::invalid_argument,
                            "ALIVE_BIND port out of range: " + port_text);
            config.bind_address = value.substr(0, colon);
            config.port = static_cast<int>(port);
        } else {
            config.bind_address = value;
        }
        if (config.bind_address.empty())
            throw Error(ErrorCode::invalid_argument, "ALIVE_BIND has an empty host");
    }
}

ServiceConfig discover_config(const std::optional<std::string>& explicit_path,
                              const EnvReader& env) {
    ServiceConfig config;
    if (explicit_path) {
        config = load_config_file(*explicit_path);
    } else if (const char* from_env = env("ALIVE_CONFIG"); from_env && *from_env) {
        config = load_config_file(from_env);
    } else if (std::filesystem::exists("alive.json")) {
        config = load_config_file("alive.json");
    }
    apply_env_overrides(config, env);
    return config;
}

}  // namespace alive
