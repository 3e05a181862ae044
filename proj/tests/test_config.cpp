#include <doctest.h>

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "alive/config.hpp"
#include "support.hpp"

using namespace alive;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

EnvReader env_of(std::map<std::string, std::string> vars) {
    auto shared = std::make_shared<std::map<std::string, std::string>>(std::move(vars));
    return [shared](const char* name) -> const char* {
        auto it = shared->find(name);
        return it == shared->end() ? nullptr : it->second.c_str();
    };
}

struct ParseFailure {
    ErrorCode code;
    std::string message;
};

ParseFailure failure_of(const json& doc) {
    try {
        config_from_json(doc);
    } catch (const Error& e) {
        return {e.code(), e.what()};
    }
    FAIL("expected the config to be rejected: ", doc.dump());
    return {ErrorCode::parse_error, ""};
}

json minimal_provider() {
    return json{{"name", "idx"}, {"kinds", json::array({"citation_count"})},
                {"base_url", "http://idx.test"}};
}

/// Restores the working directory when a test leaves the scope.
struct CwdGuard {
    fs::path saved = fs::current_path();
    ~CwdGuard() { std::error_code ec; fs::current_path(saved, ec); }
};

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("defaults survive a serialization round trip") {
    const ServiceConfig defaults;
    const ServiceConfig back = config_from_json(config_to_json(defaults));
    CHECK(back.store_path == "alive-store");
    CHECK(back.bind_address == "127.0.0.1");
    CHECK(back.port == 8080);
    CHECK(back.auth_token.empty());
    CHECK(back.refresh.mode == RefreshPolicy::Mode::on_the_fly);
    CHECK(back.refresh.nightly_at_minutes == 180);
    CHECK(back.refresh.ttl_hours == 24);
    CHECK(back.promotion.min_interval_days == 90);
    CHECK(back.providers.empty());
    CHECK(back.review_window_days == 180);

    // An empty document means "all defaults" as well.
    const ServiceConfig empty = config_from_json(json::object());
    CHECK(empty.port == 8080);
}

TEST_CASE("a fully specified document round trips") {
    const json doc{
        {"store_path", "/var/lib/alive"},
        {"bind_address", "0.0.0.0"},
        {"port", 9000},
        {"auth_token", "s3cret"},
        {"refresh", {{"mode", "nightly"}, {"nightly_at", "02:30"}, {"ttl_hours", 48}}},
        {"promotion", {{"min_interval_days", 30}}},
        {"providers", json::array({json{{"name", "idx-a"},
                                        {"kinds", json::array({"citation_count", "retraction"})},
                                        {"base_url", "http://idx-a.test"},
                                        {"timeout_ms", 1500}}})},
        {"review_window_days", 365},
    };
    const ServiceConfig config = config_from_json(doc);
    CHECK(config.store_path == "/var/lib/alive");
    CHECK(config.bind_address == "0.0.0.0");
    CHECK(config.port == 9000);
    CHECK(config.auth_token == "s3cret");
    CHECK(config.refresh.mode == RefreshPolicy::Mode::nightly);
    CHECK(config.refresh.nightly_at_minutes == 2 * 60 + 30);
    CHECK(config.refresh.ttl_hours == 48);
    CHECK(config.promotion.min_interval_days == 30);
    REQUIRE(config.providers.size() == 1);
    CHECK(config.providers[0].name == "idx-a");
    REQUIRE(config.providers[0].kinds.size() == 2);
    CHECK(config.providers[0].kinds[0] == EnrichKind::citation_count);
    CHECK(config.providers[0].kinds[1] == EnrichKind::retraction);
    CHECK(config.providers[0].base_url == "http://idx-a.test");
    CHECK(config.providers[0].timeout_ms == 1500);
    CHECK(config.review_window_days == 365);

    const ServiceConfig again = config_from_json(config_to_json(config));
    CHECK(config_to_json(again) == config_to_json(config));
}

TEST_CASE("unknown keys are rejected wherever they appear") {
    auto f = failure_of(json{{"prot", 8080}});
    CHECK(f.code == ErrorCode::parse_error);
    CHECK(contains(f.message, "prot"));

    f = failure_of(json{{"refresh", {{"ttl", 24}}}});
    CHECK(contains(f.message, "ttl"));
    CHECK(contains(f.message, "refresh"));

    f = failure_of(json{{"promotion", {{"interval", 90}}}});
    CHECK(contains(f.message, "interval"));

    json provider = minimal_provider();
    provider["timeout"] = 100;
    f = failure_of(json{{"providers", json::array({provider})}});
    CHECK(contains(f.message, "timeout"));
}

TEST_CASE("ports must fit the protocol") {
    CHECK(failure_of(json{{"port", 0}}).code == ErrorCode::parse_error);
    CHECK(failure_of(json{{"port", 70000}}).code == ErrorCode::parse_error);
    CHECK(failure_of(json{{"port", -1}}).code == ErrorCode::parse_error);
    CHECK(failure_of(json{{"port", "8080"}}).code == ErrorCode::parse_error);
    CHECK(config_from_json(json{{"port", 1}}).port == 1);
    CHECK(config_from_json(json{{"port", 65535}}).port == 65535);
}

TEST_CASE("refresh policy validation") {
    auto f = failure_of(json{{"refresh", {{"mode", "weekly"}}}});
    CHECK(contains(f.message, "on_the_fly"));
    CHECK(contains(f.message, "nightly"));

    for (const char* bad : {"25:00", "3:0", "03:60", "0300", "03:00:00", "night"}) {
        CAPTURE(bad);
        f = failure_of(json{{"refresh", {{"nightly_at", bad}}}});
        CHECK(contains(f.message, "HH:MM"));
    }

    CHECK(failure_of(json{{"refresh", {{"ttl_hours", 0}}}}).code == ErrorCode::parse_error);

    // Nightly runs are a day apart; a shorter TTL would starve the cache.
    f = failure_of(json{{"refresh", {{"mode", "nightly"}, {"ttl_hours", 12}}}});
    CHECK(contains(f.message, "24"));
    const auto ok =
        config_from_json(json{{"refresh", {{"mode", "nightly"}, {"ttl_hours", 24}}}});
    CHECK(ok.refresh.mode == RefreshPolicy::Mode::nightly);

    // on_the_fly tolerates short TTLs.
    CHECK(config_from_json(json{{"refresh", {{"ttl_hours", 1}}}}).refresh.ttl_hours == 1);
}

TEST_CASE("time-of-day parsing is exact") {
    CHECK(parse_time_of_day("00:00") == 0);
    CHECK(parse_time_of_day("03:00") == 180);
    CHECK(parse_time_of_day("23:59") == 23 * 60 + 59);
    CHECK_FALSE(parse_time_of_day("24:00"));
    CHECK_FALSE(parse_time_of_day("3:00"));
    CHECK_FALSE(parse_time_of_day("03:5"));
    CHECK_FALSE(parse_time_of_day(""));
    CHECK_FALSE(parse_time_of_day("ab:cd"));
    CHECK(format_time_of_day(180) == "03:00");
    CHECK(format_time_of_day(0) == "00:00");
    CHECK(format_time_of_day(23 * 60 + 59) == "23:59");
}

TEST_CASE("provider specs are validated") {
    auto f = failure_of(json{{"providers", json::array({json{{"name", "x"}}})}});
    CHECK(contains(f.message, "base_url"));

    json provider = minimal_provider();
    provider["kinds"] = json::array();
    CHECK(failure_of(json{{"providers", json::array({provider})}}).code ==
          ErrorCode::parse_error);

    provider = minimal_provider();
    provider["kinds"] = json::array({"citation_counts"}); // typo'd kind
    f = failure_of(json{{"providers", json::array({provider})}});
    CHECK(contains(f.message, "citation_counts"));

    provider = minimal_provider();
    provider["timeout_ms"] = 0;
    CHECK(failure_of(json{{"providers", json::array({provider})}}).code ==
          ErrorCode::parse_error);

    provider = minimal_provider();
    provider["name"] = "";
    CHECK(failure_of(json{{"providers", json::array({provider})}}).code ==
          ErrorCode::parse_error);

    // Not an array / not objects.
    CHECK(failure_of(json{{"providers", "idx"}}).code == ErrorCode::parse_error);
    CHECK(failure_of(json{{"providers", json::array({"idx"})}}).code ==
          ErrorCode::parse_error);

    const auto config =
        config_from_json(json{{"providers", json::array({minimal_provider()})}});
    CHECK(config.providers[0].timeout_ms == 2000); // default budget
}

TEST_CASE("other numeric bounds") {
    CHECK(failure_of(json{{"promotion", {{"min_interval_days", -1}}}}).code ==
          ErrorCode::parse_error);
    CHECK(config_from_json(json{{"promotion", {{"min_interval_days", 0}}}})
              .promotion.min_interval_days == 0);
    CHECK(failure_of(json{{"review_window_days", 0}}).code == ErrorCode::parse_error);
    CHECK(config_from_json(json{{"review_window_days", 1}}).review_window_days == 1);
}

TEST_CASE("environment overrides") {
    ServiceConfig config;

    SUBCASE("store path") {
        apply_env_overrides(config, env_of({{"ALIVE_STORE_PATH", "/tmp/other-store"}}));
        CHECK(config.store_path == "/tmp/other-store");
    }
    SUBCASE("an empty store path is ignored") {
        apply_env_overrides(config, env_of({{"ALIVE_STORE_PATH", ""}}));
        CHECK(config.store_path == "alive-store");
    }
    SUBCASE("bind with host only keeps the configured port") {
        config.port = 9999;
        apply_env_overrides(config, env_of({{"ALIVE_BIND", "0.0.0.0"}}));
        CHECK(config.bind_address == "0.0.0.0");
        CHECK(config.port == 9999);
    }
    SUBCASE("bind with host and port") {
        apply_env_overrides(config, env_of({{"ALIVE_BIND", "192.168.1.5:9999"}}));
        CHECK(config.bind_address == "192.168.1.5");
        CHECK(config.port == 9999);
    }
    SUBCASE("bind port out of range") {
        CHECK_THROWS_WITH_AS(
            apply_env_overrides(config, env_of({{"ALIVE_BIND", "h:99999"}})),
            doctest::Contains("99999"), Error);
    }
    SUBCASE("bind with an empty host") {
        CHECK_THROWS_AS(apply_env_overrides(config, env_of({{"ALIVE_BIND", ":8080"}})),
                        Error);
    }
    SUBCASE("no variables set changes nothing") {
        apply_env_overrides(config, env_of({}));
        CHECK(config.store_path == "alive-store");
        CHECK(config.bind_address == "127.0.0.1");
        CHECK(config.port == 8080);
    }
}

TEST_CASE("config files load with honest failure modes") {
    TempDir dir;

    const auto good = dir.file("good.json");
    testutil::write_file(good, json{{"port", 1234}}.dump());
    CHECK(load_config_file(good).port == 1234);

    try {
        load_config_file(dir.file("absent.json"));
        FAIL("expected a storage error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::storage_failure);
        CHECK(contains(e.what(), "absent.json"));
    }

    const auto bad = dir.file("broken.json");
    testutil::write_file(bad, "{ not json");
    try {
        load_config_file(bad);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse_error);
        CHECK(contains(e.what(), "broken.json"));
    }
}

TEST_CASE("discovery precedence: explicit, environment, local file, defaults") {
    TempDir dir;
    const auto explicit_file = dir.file("explicit.json");
    testutil::write_file(explicit_file, json{{"port", 1111}}.dump());
    const auto env_file = dir.file("env.json");
    testutil::write_file(env_file, json{{"port", 2222}}.dump());

    CwdGuard guard;
    const auto workdir = dir.file("workdir");
    fs::create_directories(workdir);
    fs::current_path(workdir);
    testutil::write_file(workdir / "alive.json", json{{"port", 3333}}.dump());

    const auto env = env_of({{"ALIVE_CONFIG", env_file.string()}});
    CHECK(discover_config(explicit_file.string(), env).port == 1111);
    CHECK(discover_config(std::nullopt, env).port == 2222);
    CHECK(discover_config(std::nullopt, env_of({})).port == 3333);

    fs::remove(workdir / "alive.json");
    CHECK(discover_config(std::nullopt, env_of({})).port == 8080);

    // Environment overrides land on top of whichever source won.
    const auto layered = discover_config(
        explicit_file.string(),
        env_of({{"ALIVE_CONFIG", env_file.string()},
                {"ALIVE_STORE_PATH", "/tmp/layered"},
                {"ALIVE_BIND", "10.0.0.1:4444"}}));
    CHECK(layered.port == 4444); // the bind override outranks the file
    CHECK(layered.bind_address == "10.0.0.1");
    CHECK(layered.store_path == "/tmp/layered");

    // A missing explicit file is an error, not a silent fallback.
    CHECK_THROWS_AS(discover_config(dir.file("ghost.json").string(), env_of({})), Error);
}

} // TEST_SUITE("config")
