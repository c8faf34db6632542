#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lvqa/manifest.hpp"
#include "lvqa/time_axis.hpp"

namespace lvqa {

enum class Lane { identity, caption, object, transcript, action };

inline constexpr std::array<Lane, 5> kAllLanes = {Lane::identity, Lane::caption, Lane::object,
                                                  Lane::transcript, Lane::action};

/// The five captioner settings.
enum class CaptionKind { scene_300s, narrative_1800s, action_verb, av_joint, reasoning };

std::string to_string(Lane lane);
Lane lane_from_string(std::string_view s);
std::string to_string(CaptionKind kind);
std::optional<CaptionKind> caption_kind_from_string(std::string_view s);

struct IdentityPayload {
    PersonId person;
    std::vector<double> body;
    std::vector<double> face;
    double face_score = 0.0;

    bool operator==(const IdentityPayload&) const = default;
};

struct CaptionPayload {
    std::string text;
    CaptionKind kind = CaptionKind::scene_300s;

    bool operator==(const CaptionPayload&) const = default;
};

/// Object detections with region tag "ocr" carry recognised on-screen text in `label`.
struct ObjectPayload {
    std::string label;
    std::string region;
    double score = 0.0;

    bool is_ocr() const { return region == "ocr"; }
    bool operator==(const ObjectPayload&) const = default;
};

struct SpeakerCandidate {
    PersonId person;
    double score = 0.0;

    bool operator==(const SpeakerCandidate&) const = default;
};

struct TranscriptPayload {
    std::string text;
    std::vector<SpeakerCandidate> candidates;
    std::optional<PersonId> speaker;

    bool operator==(const TranscriptPayload&) const = default;
};

struct ActionPayload {
    std::string verb;
    PersonId actor;
    std::vector<PersonId> co_actors;

    bool operator==(const ActionPayload&) const = default;
};

using LanePayload =
    std::variant<IdentityPayload, CaptionPayload, ObjectPayload, TranscriptPayload, ActionPayload>;

/// One timestamped observation in one lane.
struct LaneRecord {
    CameraId camera;
    TimeWindow window;
    LanePayload payload;

    Lane lane() const;

    template <typename P>
    const P& as() const { return std::get<P>(payload); }
    template <typename P>
    P& as() { return std::get<P>(payload); }

    bool operator==(const LaneRecord&) const = default;
};

LaneRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LaneRecord& r);

/// Throws ValidationError naming the failed invariant.
void validate_record(const LaneRecord& r, const CorpusManifest& m);

/// Orders by (window.start, camera); stable for ties.
void sort_records(std::vector<LaneRecord>& records);

/// Reads a JSONL lane file. Every record is validated against `m`.
std::vector<LaneRecord> load_lane(const std::filesystem::path& path, const CorpusManifest& m);
void save_lane(const std::vector<LaneRecord>& records, const std::filesystem::path& path);

/// Plain-text rendering used for evidence spans and summaries.
std::string render_record(const LaneRecord& r);

}  // namespace lvqa
