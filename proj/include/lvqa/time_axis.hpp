#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace lvqa {

using Seconds = std::int64_t;
using PersonId = std::string;
using CameraId = std::string;

inline constexpr Seconds kDaySeconds = 86400;
inline constexpr Seconds kHourSeconds = 3600;
inline constexpr Seconds kBucketSeconds = 900;
inline constexpr Seconds kSlotSeconds = 300;
inline constexpr int kSlotsPerHour = 12;
inline constexpr int kSlotsPerBucket = 3;

/// Half-open interval [start, end) in seconds since the corpus epoch.
struct TimeWindow {
    Seconds start = 0;
    Seconds end = 0;

    Seconds duration() const { return end - start; }
    double midpoint() const { return 0.5 * static_cast<double>(start + end); }

    auto operator<=>(const TimeWindow&) const = default;
};

/// Non-empty intersection.
inline bool overlaps(const TimeWindow& a, const TimeWindow& b) {
    return a.start < b.end && b.start < a.end;
}

inline bool contains(const TimeWindow& outer, const TimeWindow& inner) {
    return outer.start <= inner.start && inner.end <= outer.end;
}

/// 1-based day index of an epoch offset.
inline int day_of(Seconds t) { return static_cast<int>(t / kDaySeconds) + 1; }

inline Seconds second_of_day(Seconds t) { return t % kDaySeconds; }

inline Seconds day_start(int day) { return static_cast<Seconds>(day - 1) * kDaySeconds; }

/// "HH:MM" for a seconds-of-day value.
std::string clock_string(Seconds second_of_day);

}  // namespace lvqa
