#include <doctest.h>

#include <functional>
#include <string>

#include "alive/registry.hpp"
#include "support.hpp"

using namespace alive;
using testutil::FakeClock;
using testutil::TempDir;

namespace {

struct Fixture {
    TempDir dir;
    FakeClock clock{Date{2021, 1, 1}};
    Registry reg;
    const PublicationId target{"pub-t"};

    Fixture() : reg(dir.path, options(clock)) {
        reg.publish_revision(target, "v1", "");
    }

    static Registry::Options options(const FakeClock& clock) {
        Registry::Options o;
        o.clock = clock.clock();
        return o;
    }

    ErrorCode code_of(const std::function<void()>& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        FAIL("expected a domain error");
        return ErrorCode::invalid_argument;
    }
};

} // namespace

TEST_SUITE("notifier") {

TEST_CASE("registration records the citation against a revision date") {
    Fixture fx;
    const auto link = fx.reg.register_backlink("doc-1", fx.target, Date{2021, 1, 1});
    CHECK(link.citing_doc == "doc-1");
    CHECK(link.target == fx.target);
    CHECK(link.recorded_revision_date == Date{2021, 1, 1});
    CHECK_FALSE(link.stale); // recorded date matches the target's current date
    CHECK_FALSE(link.acknowledged_at);

    const auto found = fx.reg.find_backlink("doc-1", fx.target);
    REQUIRE(found);
    CHECK(found->recorded_revision_date == link.recorded_revision_date);
    CHECK_FALSE(fx.reg.find_backlink("doc-2", fx.target));

    // A reference recorded against an already-superseded date is stale at birth.
    fx.clock.set(Date{2021, 2, 1});
    fx.reg.publish_revision(fx.target, "v2", "");
    const auto late = fx.reg.register_backlink("doc-late", fx.target, Date{2021, 1, 1});
    CHECK(late.stale);
}

TEST_CASE("registration validates its inputs") {
    Fixture fx;
    CHECK(fx.code_of([&] { fx.reg.register_backlink("", fx.target, Date{2021, 1, 1}); }) ==
          ErrorCode::invalid_argument);
    CHECK(fx.code_of([&] { fx.reg.register_backlink("doc-1", fx.target, Date{2021, 2, 30}); }) ==
          ErrorCode::invalid_argument);
    CHECK(fx.code_of([&] {
              fx.reg.register_backlink("doc-1", PublicationId("ghost"), Date{2021, 1, 1});
          }) == ErrorCode::not_found_publication);
}

TEST_CASE("a new revision flips fresh references stale and notifies once") {
    Fixture fx;
    fx.reg.register_backlink("doc-1", fx.target, Date{2021, 1, 1});
    fx.reg.register_backlink("doc-2", fx.target, Date{2021, 1, 1});

    fx.clock.set(Date{2021, 3, 18});
    const auto rec = fx.reg.publish_revision(fx.target, "v2", "update");

    for (const std::string doc : {"doc-1", "doc-2"}) {
        CAPTURE(doc);
        CHECK(fx.reg.find_backlink(doc, fx.target)->stale);
        const auto pending = fx.reg.peek_notifications(doc);
        REQUIRE(pending.size() == 1);
        CHECK(pending[0].target == fx.target);
        CHECK(pending[0].new_version == rec.version);
        CHECK(pending[0].new_date == Date{2021, 3, 18});
        CHECK(pending[0].citing_doc == doc);
    }

    // Already-stale references are not notified again on the next revision.
    fx.clock.set(Date{2021, 4, 1});
    fx.reg.publish_revision(fx.target, "v3", "");
    CHECK(fx.reg.peek_notifications("doc-1").size() == 1);

    // Draining empties the outbox exactly once.
    const auto drained = fx.reg.drain_notifications("doc-1");
    CHECK(drained.size() == 1);
    CHECK(fx.reg.peek_notifications("doc-1").empty());
    CHECK(fx.reg.drain_notifications("doc-1").empty());
    // doc-2's outbox is untouched by doc-1's drain.
    CHECK(fx.reg.peek_notifications("doc-2").size() == 1);
}

TEST_CASE("acknowledgement freshens the reference until the next revision") {
    Fixture fx;
    fx.reg.register_backlink("doc-1", fx.target, Date{2021, 1, 1});

    fx.clock.set(Date{2021, 2, 1});
    fx.reg.publish_revision(fx.target, "v2", "");
    REQUIRE(fx.reg.find_backlink("doc-1", fx.target)->stale);

    fx.clock.set(Date{2021, 2, 10});
    const auto acked = fx.reg.acknowledge("doc-1", fx.target, fx.clock.now());
    CHECK_FALSE(acked.stale);
    CHECK(acked.acknowledged_at == fx.clock.now());
    // The acknowledgement re-records against the target's current date.
    CHECK(acked.recorded_revision_date == Date{2021, 2, 1});

    // Still fresh until the target moves again …
    CHECK_FALSE(fx.reg.find_backlink("doc-1", fx.target)->stale);
    fx.clock.set(Date{2021, 3, 1});
    fx.reg.publish_revision(fx.target, "v3", "");
    CHECK(fx.reg.find_backlink("doc-1", fx.target)->stale);
    // … and the new staleness produces a fresh notification.
    CHECK(fx.reg.peek_notifications("doc-1").size() == 2);
}

TEST_CASE("acknowledging an unknown link is an error") {
    Fixture fx;
    CHECK(fx.code_of([&] { fx.reg.acknowledge("doc-x", fx.target, fx.clock.now()); }) ==
          ErrorCode::not_found_backlink);
}

TEST_CASE("re-registration replaces the record and clears the acknowledgement") {
    Fixture fx;
    fx.reg.register_backlink("doc-1", fx.target, Date{2021, 1, 1});
    fx.clock.set(Date{2021, 2, 1});
    fx.reg.publish_revision(fx.target, "v2", "");
    fx.reg.acknowledge("doc-1", fx.target, fx.clock.now());
    REQUIRE(fx.reg.find_backlink("doc-1", fx.target)->acknowledged_at);

    const auto replaced = fx.reg.register_backlink("doc-1", fx.target, Date{2021, 2, 1});
    CHECK_FALSE(replaced.acknowledged_at);
    CHECK_FALSE(replaced.stale);
    CHECK(fx.reg.backlinks_of(fx.target).size() == 1); // replaced, not duplicated
}

TEST_CASE("duplicate revision events do not duplicate notifications") {
    Fixture fx;
    fx.reg.register_backlink("doc-1", fx.target, Date{2021, 1, 1});

    // Deliver the same revision event twice (e.g. a replayed hook).
    const auto first = fx.reg.on_revision(fx.target, 2, Date{2021, 2, 1});
    CHECK(first.size() == 1);
    const auto second = fx.reg.on_revision(fx.target, 2, Date{2021, 2, 2});
    CHECK(second.empty());
    CHECK(fx.reg.peek_notifications("doc-1").size() == 1);
}

TEST_CASE("backlinks_of lists every citing document of a target") {
    Fixture fx;
    fx.reg.publish_revision(PublicationId("pub-other"), "x", "");
    fx.reg.register_backlink("doc-1", fx.target, Date{2021, 1, 1});
    fx.reg.register_backlink("doc-2", fx.target, Date{2021, 1, 1});
    fx.reg.register_backlink("doc-1", PublicationId("pub-other"), Date{2021, 1, 1});

    const auto links = fx.reg.backlinks_of(fx.target);
    CHECK(links.size() == 2);
    for (const auto& l : links) CHECK(l.target == fx.target);
}

TEST_CASE("notifications survive a registry restart") {
    TempDir dir;
    FakeClock clock{Date{2021, 1, 1}};
    const PublicationId target("pub-t");
    {
        Registry reg(dir.path, Fixture::options(clock));
        reg.publish_revision(target, "v1", "");
        reg.register_backlink("doc-1", target, Date{2021, 1, 1});
        clock.set(Date{2021, 5, 5});
        reg.publish_revision(target, "v2", "");
    }
    Registry reg(dir.path, Fixture::options(clock));
    const auto pending = reg.peek_notifications("doc-1");
    REQUIRE(pending.size() == 1);
    CHECK(pending[0].new_version == 2);
    CHECK(reg.find_backlink("doc-1", target)->stale);
}

} // TEST_SUITE("notifier")
