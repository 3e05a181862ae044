#include "alive/time.hpp"

#include <cstdio>
#include <ctime>

namespace alive {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(int y, unsigned m) {
    static constexpr unsigned k[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap(y)) return 29;
    return (m >= 1 && m <= 12) ? k[m - 1] : 0;
}

// Howard Hinnant's civil-days algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), m, d};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

bool Date::valid() const {
    return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

std::string Date::str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
    return buf;
}

std::int64_t Date::serial() const { return days_from_civil(year, month, day); }

Date Date::from_serial(std::int64_t days) { return civil_from_days(days); }

std::int64_t days_between(const Date& a, const Date& b) { return b.serial() - a.serial(); }

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    for (size_t i = 0; i < 10; ++i) {
        if (i == 4 || i == 7) continue;
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
    }
    auto num = [&](size_t pos, size_t n) {
        int v = 0;
        for (size_t i = 0; i < n; ++i) v = v * 10 + (text[pos + i] - '0');
        return v;
    };
    Date d{num(0, 4), static_cast<unsigned>(num(5, 2)), static_cast<unsigned>(num(8, 2))};
    if (!d.valid()) return std::nullopt;
    return d;
}

std::string Instant::str() const {
    const std::int64_t days = floor_div(secs, 86400);
    std::int64_t rem = secs - days * 86400;
    const Date d = Date::from_serial(days);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", d.year, d.month, d.day,
                  static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

Date Instant::date() const { return Date::from_serial(floor_div(secs, 86400)); }

Instant Instant::from_date(const Date& d, int hh, int mm, int ss) {
    return Instant{d.serial() * 86400 + hh * 3600 + mm * 60 + ss};
}

std::optional<Instant> parse_instant(std::string_view text) {
    if (text.size() != 20 || text[10] != 'T' || text[19] != 'Z') return std::nullopt;
    auto d = parse_date(text.substr(0, 10));
    if (!d) return std::nullopt;
    auto two = [&](size_t pos) -> int {
        char a = text[pos], b = text[pos + 1];
        if (a < '0' || a > '9' || b < '0' || b > '9') return -1;
        return (a - '0') * 10 + (b - '0');
    };
    const int hh = two(11), mm = two(14), ss = two(17);
    if (text[13] != ':' || text[16] != ':') return std::nullopt;
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) return std::nullopt;
    return Instant::from_date(*d, hh, mm, ss);
}

Instant system_now() { return Instant{static_cast<std::int64_t>(std::time(nullptr))}; }

Clock system_clock() {
    return [] { return system_now(); };
}

}  // namespace alive
