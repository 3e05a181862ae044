#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "alive/config.hpp"
#include "alive/meta_marker.hpp"
#include "alive/registry.hpp"
#include "alive/service.hpp"
#include "http_fixture.hpp"
#include "support.hpp"

using namespace alive;
using testutil::FakeClock;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

struct CliFixture {
    TempDir dir;
    int run_counter = 0;

    std::string store() const { return (dir.path / "store").string(); }

    /// Runs the CLI binary from inside the fixture directory with a clean
    /// environment (no config discovery from the developer's shell).
    CliResult run_bare(const std::string& args) {
        const fs::path out_file = dir.path / ("out." + std::to_string(++run_counter));
        const fs::path err_file = dir.path / ("err." + std::to_string(run_counter));
        const std::string command =
            "cd '" + dir.path.string() + "' && env -u ALIVE_CONFIG -u ALIVE_STORE_PATH"
            " -u ALIVE_BIND '" ALIVE_BIN_PATH "' " + args +
            " >'" + out_file.string() + "' 2>'" + err_file.string() + "'";
        const int rc = std::system(command.c_str());
        REQUIRE(rc != -1);
        CliResult result;
        result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
        result.out = testutil::read_file(out_file);
        result.err = testutil::read_file(err_file);
        return result;
    }

    CliResult run(const std::string& args) {
        return run_bare("--store '" + store() + "' " + args);
    }

    fs::path write_doc(const std::string& name, const std::string& text) {
        const fs::path path = dir.path / name;
        testutil::write_file(path, text);
        return path;
    }
};

/// A publishable document with a metadata block the CLI should pick up.
std::string article_text() {
    MetaAttributes meta;
    meta.title = "A living article";
    meta.authors = {"Ivanov A. P."};
    meta.first_online_year = 2019;
    return embed_meta("The article body.\n", meta);
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("publish, resolve, history, and update checks") {
    CliFixture fx;
    fx.write_doc("draft.md", article_text());

    auto published = fx.run("publish pub-a draft.md --note 'first cut'");
    CHECK(published.exit_code == 0);
    CHECK(contains(published.out, "published pub-av1  "));
    CHECK(contains(published.out, "track=author"));
    CHECK(contains(published.out, "note=first cut"));

    fx.write_doc("draft.md", article_text() + "\nRevised paragraph.\n");
    published = fx.run("publish pub-a draft.md");
    CHECK(contains(published.out, "published pub-av2"));

    const auto resolved = fx.run("--json resolve pub-a");
    CHECK(resolved.exit_code == 0);
    const json body = json::parse(resolved.out);
    CHECK(testutil::check_against("resolve", body).empty());
    CHECK(body["version"] == 2);
    CHECK(body["outdated"] == false);

    // The document's metadata block was applied on publish.
    const auto rendered = fx.run("render pub-a --kinds retraction");
    CHECK(rendered.exit_code == 0);
    CHECK(contains(rendered.out, "A living article"));
    CHECK(contains(rendered.out, "Ivanov A. P. (2019)."));
    CHECK(contains(rendered.out, "Last updated \xE2\x89\x88"));

    const auto pinned = fx.run("check-updates pub-av1");
    CHECK(pinned.exit_code == 0);
    CHECK(contains(pinned.out, "newer version available: pub-av2 ("));
    CHECK(contains(fx.run("check-updates pub-a").out, "up to date: pub-av2"));

    const auto history = fx.run("history pub-a");
    CHECK(history.exit_code == 0);
    CHECK(contains(history.out, "revision  v1"));
    CHECK(contains(history.out, "revision  v2"));
    CHECK(contains(history.out, "first cut"));
}

TEST_CASE("domain errors exit 1, usage errors exit 2") {
    CliFixture fx;

    const auto missing = fx.run("resolve nosuch");
    CHECK(missing.exit_code == 1);
    CHECK(contains(missing.err, "error: "));
    CHECK(contains(missing.err, "nosuch"));
    CHECK(missing.out.empty());

    CHECK(fx.run_bare("").exit_code == 2);            // a subcommand is required
    CHECK(fx.run("frobnicate").exit_code == 2);       // unknown subcommand
    CHECK(fx.run("promote pub-a").exit_code == 2);    // missing required argument
    CHECK(fx.run("resolve pub-a --sideways").exit_code == 2);
    CHECK(fx.run("render pub-a --style chicago").exit_code == 2);
    CHECK(fx.run("render pub-a --kinds karma").exit_code == 2);
}

TEST_CASE("promotion and retraction from the command line") {
    CliFixture fx;
    fx.write_doc("a.md", article_text());
    fx.run("publish pub-a a.md");
    fx.write_doc("a.md", article_text() + "more\n");
    fx.run("publish pub-a a.md");

    const auto promoted = fx.run("promote pub-a 1");
    CHECK(promoted.exit_code == 0);
    CHECK(contains(promoted.out, "promoted to official track: pub-av1"));

    // Same-day second promotion violates the spacing policy.
    const auto limited = fx.run("promote pub-a 2");
    CHECK(limited.exit_code == 1);
    CHECK(contains(limited.err, "error: "));

    const auto official = fx.run("--json resolve pub-a --official");
    CHECK(json::parse(official.out)["version"] == 1);
    CHECK(json::parse(fx.run("--json resolve pub-a").out)["version"] == 2);

    const auto retracted = fx.run("retract pub-a --reason 'bad data'");
    CHECK(retracted.exit_code == 0);
    CHECK(contains(retracted.out, "retracted pub-a"));

    const auto gone = fx.run("--json resolve pub-a");
    CHECK(gone.exit_code == 0); // still resolvable, with the notice attached
    const json gone_body = json::parse(gone.out);
    CHECK(gone_body["retracted"] == true);
    CHECK(gone_body["notice"] == "This publication has been retracted: bad data");
    CHECK(contains(fx.run("resolve pub-a").out, "notice: "));

    const auto ref = fx.run("render pub-a --kinds retraction");
    CHECK(contains(ref.out, "[RETRACTED]"));
}

TEST_CASE("render prints plain text or markup") {
    CliFixture fx;
    fx.write_doc("a.md", article_text());
    fx.run("publish pub-a a.md");

    const auto markup = fx.run("render pub-a --kinds retraction --markup");
    CHECK(markup.exit_code == 0);
    CHECK(contains(markup.out, "<span class=\"alive-ref\""));

    const auto json_out = fx.run("--json render pub-a --kinds retraction,recent_review");
    const json body = json::parse(json_out.out);
    CHECK(testutil::check_against("reference", body).empty());
    CHECK(body["style"] == "harvard");

    CHECK(json::parse(fx.run("--json render pub-a --style vancouver --kinds retraction").out)
              ["style"] == "vancouver");
}

TEST_CASE("refresh rewrites living-date markers in place") {
    CliFixture fx;
    fx.write_doc("target.md", article_text());
    fx.run("publish pub-t target.md");

    // What the ledger believes the current revision date to be.
    std::string today;
    {
        Registry registry(fx.store());
        today = registry.meta(PublicationId("pub-t")).last_revision_date->str();
    }

    MetaAttributes none;
    const std::string citing = embed_meta(
        "As shown in the survey (last seen \xE2\x89\x88" "2020-01-01\xE2\x89\x88), results hold.\n",
        none, {{0, PublicationId("pub-t")}});
    const fs::path doc = fx.write_doc("citing.md", citing);
    const std::string before = testutil::read_file(doc);

    const auto refreshed = fx.run("refresh citing.md");
    CHECK(refreshed.exit_code == 0);
    CHECK(contains(refreshed.out, "refreshed 1 marker(s) in citing.md"));

    const std::string after = testutil::read_file(doc);
    CHECK(after != before);
    // The rewrite touches exactly the ten date bytes.
    std::string expected = before;
    expected.replace(expected.find("2020-01-01"), 10, today);
    CHECK(after == expected);

    // Idempotent: a second run changes nothing and does not rewrite the file.
    const auto again = fx.run("refresh citing.md");
    CHECK(again.exit_code == 0);
    CHECK(contains(again.out, "document is up to date"));
    CHECK(testutil::read_file(doc) == after);

    // Machine-readable summary.
    const auto as_json = fx.run("--json refresh citing.md");
    const json body = json::parse(as_json.out);
    CHECK(testutil::check_against("refresh_result", body).empty());
    CHECK(body["changed"] == 0);

    // A binding whose target is unknown is reported, not guessed at.
    const std::string dangling = embed_meta(
        "Dangling \xE2\x89\x88" "2020-01-01\xE2\x89\x88 here.\n", none,
        {{0, PublicationId("ghost-pub")}});
    fx.write_doc("dangling.md", dangling);
    const auto unresolved = fx.run("refresh dangling.md");
    CHECK(unresolved.exit_code == 0);
    CHECK(contains(unresolved.out, "document is up to date"));
    CHECK(contains(unresolved.err, "unresolved: "));
    CHECK(contains(unresolved.err, "ghost-pub"));
}

TEST_CASE("check-links probes every URL found in a document") {
    testutil::TestHttpServer web;
    web.server().Get("/ok", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("fine", "text/plain");
    });
    web.server().Get("/missing", [](const httplib::Request&, httplib::Response& res) {
        res.status = 404;
        res.set_content("gone", "text/plain");
    });
    web.start();

    CliFixture fx;
    const std::string doc_text =
        "Healthy: " + web.url("/ok") + ".\n"
        "Dead: " + web.url("/missing") + ",\n"
        "No TLS here: https://127.0.0.1:1/tls\n"
        "Mangled: http:// oops\n";
    fx.write_doc("links.md", doc_text);

    const auto report = fx.run("check-links links.md");
    CHECK(report.exit_code == 0);
    CHECK(contains(report.out, "ok (200)  " + web.url("/ok")));
    CHECK(contains(report.out, "broken (404)  " + web.url("/missing")));
    CHECK(contains(report.out, "broken  https://127.0.0.1:1/tls"));
    CHECK(contains(report.out, "invalid  http://"));

    const auto as_json = fx.run("--json check-links links.md");
    const json body = json::parse(as_json.out);
    CHECK(testutil::check_against("link_report", body).empty());
    REQUIRE(body["links"].size() == 4);
    CHECK(body["links"][0]["url"] == web.url("/ok"));
    CHECK(body["links"][0]["state"] == "ok");

    fx.write_doc("bare.md", "no links in here\n");
    CHECK(contains(fx.run("check-links bare.md").out, "no URLs found"));
}

TEST_CASE("notify drains staleness notifications for a citing document") {
    CliFixture fx;
    {
        // Seed history with an injected clock: register while current, then
        // let a later revision make the reference stale.
        FakeClock clock{Date{2021, 6, 1}};
        Registry::Options opts;
        opts.clock = clock.clock();
        Registry registry(fx.store(), opts);
        const PublicationId target("pub-t");
        registry.publish_revision(target, "v1 text", "");
        registry.register_backlink("doc-cite", target, Date{2021, 6, 1});
        clock.advance_days(10);
        registry.publish_revision(target, "v2 text", "");
    }

    const auto drained = fx.run("notify doc-cite");
    CHECK(drained.exit_code == 0);
    CHECK(contains(drained.out,
                   "pub-t revised to v2 on 2021-06-11 (reference possibly outdated)"));

    const auto empty = fx.run("notify doc-cite");
    CHECK(empty.exit_code == 0);
    CHECK(contains(empty.out, "no notifications"));
}

TEST_CASE("config file discovery: --config beats ./alive.json") {
    CliFixture fx;
    fx.write_doc("a.md", article_text());

    // A config in the working directory is picked up without flags.
    testutil::write_file(fx.dir.path / "alive.json",
                         json{{"store_path", (fx.dir.path / "local-store").string()}}.dump());
    CHECK(fx.run_bare("publish pub-a a.md").exit_code == 0);
    CHECK(fs::exists(fx.dir.path / "local-store"));

    // An explicit --config wins over the local file.
    testutil::write_file(
        fx.dir.path / "other.json",
        json{{"store_path", (fx.dir.path / "other-store").string()}}.dump());
    CHECK(fx.run_bare("--config other.json publish pub-b a.md").exit_code == 0);
    CHECK(fs::exists(fx.dir.path / "other-store"));
    CHECK(fx.run_bare("--config other.json resolve pub-b").exit_code == 0);
    CHECK(fx.run_bare("--config other.json resolve pub-a").exit_code == 1);
}

TEST_CASE("remote mode drives a running service over HTTP") {
    TempDir service_dir;
    FakeClock clock{Date{2021, 6, 1}};
    ServiceConfig config;
    config.store_path = (service_dir.path / "store").string();
    config.auth_token = "sekret";
    Service service(config, clock.clock());
    const int port = service.bind_any_port();
    service.listen_async();
    const std::string remote = "--remote http://127.0.0.1:" + std::to_string(port);

    CliFixture fx;
    fx.write_doc("a.md", article_text());

    // Mutations need the right token.
    const auto denied = fx.run_bare(remote + " publish pub-rem a.md");
    CHECK(denied.exit_code == 1);
    CHECK(contains(denied.err, "error: missing or wrong bearer token"));

    const auto published =
        fx.run_bare(remote + " --token sekret publish pub-rem a.md");
    CHECK(published.exit_code == 0);
    CHECK(contains(published.out, "published pub-remv1"));

    // Reads need no token.
    const auto resolved = fx.run_bare(remote + " --json resolve pub-rem");
    CHECK(resolved.exit_code == 0);
    CHECK(json::parse(resolved.out)["version"] == 1);

    // Staleness round trip against the live service.
    service.registry().register_backlink("doc-far", PublicationId("pub-rem"),
                                         clock.today());
    clock.advance_days(4);
    fx.write_doc("a.md", article_text() + "more\n");
    fx.run_bare(remote + " --token sekret publish pub-rem a.md");
    const auto note = fx.run_bare(remote + " --token sekret notify doc-far");
    CHECK(note.exit_code == 0);
    CHECK(contains(note.out,
                   "pub-rem revised to v2 on 2021-06-05 (reference possibly outdated)"));

    // A remote retraction still resolves (with the notice), exit code 0.
    fx.run_bare(remote + " --token sekret retract pub-rem --reason oops");
    const auto gone = fx.run_bare(remote + " --json resolve pub-rem");
    CHECK(gone.exit_code == 0);
    const json body = json::parse(gone.out);
    CHECK(body["retracted"] == true);
    CHECK(body["notice"] == "This publication has been retracted: oops");

    // A dead endpoint is a domain error, not a crash.
    const auto unreachable =
        fx.run_bare("--remote http://127.0.0.1:1 resolve pub-rem");
    CHECK(unreachable.exit_code == 1);
    CHECK(contains(unreachable.err, "error: "));
}

} // TEST_SUITE("cli")
