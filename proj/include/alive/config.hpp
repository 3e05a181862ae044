#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alive/enrichment.hpp"
#include "alive/registry.hpp"

namespace alive {

/// How living data is kept current: fetched per request, or re-fetched in a
/// nightly batch and served from cache between runs.
struct RefreshPolicy {
    enum class Mode { on_the_fly, nightly };
    Mode mode = Mode::on_the_fly;
    int nightly_at_minutes = 3 * 60;  // time of day, UTC minutes since midnight
    int ttl_hours = 24;
};

const char* to_string(RefreshPolicy::Mode mode);
std::optional<RefreshPolicy::Mode> refresh_mode_from_string(std::string_view text);

/// Parses "HH:MM" (24-hour) to minutes since midnight.
std::optional<int> parse_time_of_day(std::string_view text);
std::string format_time_of_day(int minutes);

/// Everything the service and the CLI need to run. Field defaults are the
/// running defaults; a config file and environment variables override them.
struct ServiceConfig {
    std::string store_path = "alive-store";
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    /// Shared token required (as `Authorization: Bearer <token>`) on
    /// mutating endpoints. Empty disables authentication.
    std::string auth_token;
    RefreshPolicy refresh;
    PromotionPolicy promotion;
    std::vector<HttpProviderSpec> providers;
    int review_window_days = 180;
};

/// Reads environment variables; injectable for tests.
using EnvReader = std::function<const char*(const char*)>;
EnvReader system_env();

/// Parses and validates a config document. Unknown keys are rejected (they
/// are almost always typos). Nightly mode requires ttl_hours >= 24 so cached
/// values stay valid between daily runs.
ServiceConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ServiceConfig& config);

/// Loads a config file (JSON). Throws on missing file or invalid content.
ServiceConfig load_config_file(const std::filesystem::path& path);

/// Applies environment overrides: ALIVE_STORE_PATH replaces the store path
/// and ALIVE_BIND replaces the bind address ("host" or "host:port").
void apply_env_overrides(ServiceConfig& config, const EnvReader& env = system_env());

/// Full discovery chain: explicit path beats the ALIVE_CONFIG environment
/// variable, which beats ./alive.json (used only if present), which beats
/// built-in defaults. Environment overrides apply on top of whichever
/// source won.
ServiceConfig discover_config(const std::optional<std::string>& explicit_path,
                              const EnvReader& env = system_env());

}  // namespace alive
