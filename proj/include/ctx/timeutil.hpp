#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ctx {

// Seconds since the Unix epoch, UTC. All timestamps in the kernel are UTC.
using Timestamp = std::int64_t;

// Parses "YYYY-MM-DDTHH:MM:SSZ" (the only accepted form). Throws Error(ClockSkew)
// on anything else, including out-of-range fields.
Timestamp parse_timestamp(const std::string& iso);

std::string format_timestamp(Timestamp t);

// Half-open validity interval [from, to). A missing `to` means open-ended.
struct Interval {
    Timestamp from = 0;
    std::optional<Timestamp> to;

    bool covers(Timestamp t) const {
        return from <= t && (!to || t < *to);
    }

    bool overlaps(const Interval& other) const {
        const bool this_before = to && *to <= other.from;
        const bool other_before = other.to && *other.to <= from;
        return !this_before && !other_before;
    }

    // Intersection of two intervals; empty result reported via nullopt.
    static std::optional<Interval> intersect(const Interval& a, const Interval& b);

    bool operator==(const Interval& other) const = default;
};

} // namespace ctx
