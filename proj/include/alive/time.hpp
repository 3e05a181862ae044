#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace alive {

/// UTC calendar date. Comparable; textual form is ISO-8601 `YYYY-MM-DD`.
struct Date {
    int year = 0;
    unsigned month = 1;
    unsigned day = 1;

    auto operator<=>(const Date&) const = default;

    bool valid() const;
    std::string str() const;

    /// Days since 1970-01-01 (proleptic Gregorian).
    std::int64_t serial() const;
    static Date from_serial(std::int64_t days);

    Date plus_days(std::int64_t n) const { return from_serial(serial() + n); }
};

/// Whole days from `a` to `b` (positive when b is later).
std::int64_t days_between(const Date& a, const Date& b);

std::optional<Date> parse_date(std::string_view text);

/// UTC instant, second precision. Textual form is `YYYY-MM-DDTHH:MM:SSZ`.
struct Instant {
    std::int64_t secs = 0;

    auto operator<=>(const Instant&) const = default;

    std::string str() const;
    Date date() const;

    static Instant from_date(const Date& d, int hh = 0, int mm = 0, int ss = 0);
};

std::optional<Instant> parse_instant(std::string_view text);

using Clock = std::function<Instant()>;

Instant system_now();
Clock system_clock();

}  // namespace alive
