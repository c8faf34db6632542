#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvqa/time_axis.hpp"

namespace lvqa {

enum class CameraKind { ego, exo };

struct CameraInfo {
    CameraId id;
    CameraKind kind = CameraKind::exo;
    std::optional<PersonId> wearer;

    bool operator==(const CameraInfo&) const = default;
};

struct PersonInfo {
    PersonId id;
    std::string name;

    bool operator==(const PersonInfo&) const = default;
};

/// Recorded interval of one day, in seconds of day.
struct DaySpan {
    Seconds start = 0;
    Seconds end = 0;

    bool operator==(const DaySpan&) const = default;
};

/// Corpus-wide description every lane file is validated against.
///
/// `day_spans` optionally overrides `day_span` per day (index 0 is day 1);
/// when present it must have exactly `days` entries.
struct CorpusManifest {
    int days = 0;
    Seconds epoch = 0;
    DaySpan day_span;
    std::vector<DaySpan> day_spans;
    std::vector<CameraInfo> cameras;
    std::vector<PersonInfo> roster;
    int embedding_dim = 0;

    const DaySpan& span_for_day(int day) const;
    /// Absolute window of `day`'s recorded interval.
    TimeWindow day_window(int day) const;
    /// True when `w` lies inside the recorded interval of a single day.
    bool covers(const TimeWindow& w) const;

    const CameraInfo* find_camera(const CameraId& id) const;
    bool has_person(const PersonId& id) const;
    bool is_exo(const CameraId& id) const;

    /// Throws ValidationError naming the first failed invariant.
    void validate() const;

    bool operator==(const CorpusManifest&) const = default;
};

CorpusManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusManifest& m);

/// Reads and validates a manifest file.
CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CorpusManifest& m, const std::filesystem::path& path);

std::string to_string(CameraKind kind);

}  // namespace lvqa
