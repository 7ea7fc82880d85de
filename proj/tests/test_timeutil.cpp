#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ctx/errors.hpp"
#include "ctx/timeutil.hpp"

using namespace ctx;

TEST_CASE("parse_timestamp matches epoch seconds computed externally") {
    // Frozen with an independent calendar implementation before the build.
    CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_timestamp("2000-01-01T00:00:00Z") == 946684800);
    CHECK(parse_timestamp("2008-02-29T23:59:59Z") == 1204329599); // leap day
    CHECK(parse_timestamp("2009-06-02T08:00:00Z") == 1243929600); // a Tuesday
    CHECK(parse_timestamp("2009-06-02T11:00:00Z") == 1243940400);
    CHECK(parse_timestamp("2038-01-19T03:14:07Z") == 2147483647);
}

TEST_CASE("format_timestamp inverts parse_timestamp") {
    for (const char* iso : {"1970-01-01T00:00:00Z", "2000-01-01T00:00:00Z",
                            "2008-02-29T23:59:59Z", "2009-06-02T11:00:00Z",
                            "2038-01-19T03:14:07Z", "1999-12-31T23:59:59Z"})
        CHECK(format_timestamp(parse_timestamp(iso)) == iso);
}

TEST_CASE("round trip across a dense sweep of instants") {
    for (Timestamp t = 0; t < 4'000'000'000LL; t += 86'399'137)
        CHECK(parse_timestamp(format_timestamp(t)) == t);
}

TEST_CASE("malformed timestamps are rejected") {
    for (const char* bad : {"", "not a date", "2009-13-01T00:00:00Z", "2009-06-32T00:00:00Z",
                            "2009-06-02T24:00:00Z", "2009-06-02T11:60:00Z", "2009-06-02",
                            "2009-06-02T11:00:00", "2009-06-02 11:00:00Z"})
        CHECK_THROWS_AS(parse_timestamp(bad), Error);
}

TEST_CASE("intervals are half-open") {
    Interval v{100, 200};
    CHECK(v.covers(100));
    CHECK(v.covers(199));
    CHECK_FALSE(v.covers(200)); // end excluded
    CHECK_FALSE(v.covers(99));

    Interval open{100, std::nullopt};
    CHECK(open.covers(100));
    CHECK(open.covers(1'000'000'000));
    CHECK_FALSE(open.covers(99));
}

TEST_CASE("adjacent intervals do not overlap") {
    Interval morning{0, 100};
    Interval afternoon{100, 200};
    CHECK_FALSE(morning.overlaps(afternoon));
    CHECK_FALSE(afternoon.overlaps(morning));
    CHECK_FALSE(Interval::intersect(morning, afternoon).has_value());
}

TEST_CASE("intersection clips to the shared range") {
    auto both = Interval::intersect({0, 150}, {100, 200});
    REQUIRE(both.has_value());
    CHECK(both->from == 100);
    CHECK(both->to == 150);

    auto with_open = Interval::intersect({50, std::nullopt}, {0, 120});
    REQUIRE(with_open.has_value());
    CHECK(with_open->from == 50);
    CHECK(with_open->to == 120);

    auto open_open = Interval::intersect({50, std::nullopt}, {80, std::nullopt});
    REQUIRE(open_open.has_value());
    CHECK(open_open->from == 80);
    CHECK_FALSE(open_open->to.has_value());

    CHECK_FALSE(Interval::intersect({0, 50}, {60, 70}).has_value());
}
