#include "ctx/timeutil.hpp"

#include <array>
#include <cstdio>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

// Civil-date conversion after Howard Hinnant's algorithms; valid over the
// whole int64 range we care about.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

unsigned days_in_month(std::int64_t y, unsigned m) {
    static const std::array<unsigned, 12> k = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2) {
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return leap ? 29 : 28;
    }
    return k[m - 1];
}

bool all_digits(const std::string& s, size_t pos, size_t n) {
    for (size_t i = pos; i < pos + n; ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

int num(const std::string& s, size_t pos, size_t n) {
    int v = 0;
    for (size_t i = pos; i < pos + n; ++i) v = v * 10 + (s[i] - '0');
    return v;
}

} // namespace

Timestamp parse_timestamp(const std::string& iso) {
    // YYYY-MM-DDTHH:MM:SSZ
    if (iso.size() != 20 || iso[4] != '-' || iso[7] != '-' || iso[10] != 'T' ||
        iso[13] != ':' || iso[16] != ':' || iso[19] != 'Z' ||
        !all_digits(iso, 0, 4) || !all_digits(iso, 5, 2) || !all_digits(iso, 8, 2) ||
        !all_digits(iso, 11, 2) || !all_digits(iso, 14, 2) || !all_digits(iso, 17, 2))
        throw Error(Errc::ClockSkew, "unparseable timestamp '" + iso + "'");

    const int y = num(iso, 0, 4), mo = num(iso, 5, 2), d = num(iso, 8, 2);
    const int h = num(iso, 11, 2), mi = num(iso, 14, 2), se = num(iso, 17, 2);
    if (mo < 1 || mo > 12 || d < 1 || d > static_cast<int>(days_in_month(y, mo)) ||
        h > 23 || mi > 59 || se > 59)
        throw Error(Errc::ClockSkew, "timestamp field out of range in '" + iso + "'");

    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_timestamp(Timestamp t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), mo, d,
                  static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

std::optional<Interval> Interval::intersect(const Interval& a, const Interval& b) {
    Interval r;
    r.from = a.from > b.from ? a.from : b.from;
    if (a.to && b.to)
        r.to = *a.to < *b.to ? *a.to : *b.to;
    else if (a.to)
        r.to = a.to;
    else
        r.to = b.to;
    if (r.to && *r.to <= r.from) return std::nullopt;
    return r;
}

} // namespace ctx
