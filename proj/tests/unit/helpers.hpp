#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "lvqa/lane_record.hpp"
#include "lvqa/manifest.hpp"

namespace lvqa::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("lvqa_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& body) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << body;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Two days of 09:00-11:00, ego1 worn by ann, exo1 and exo2 fixed, 3-d embeddings.
inline CorpusManifest small_manifest() {
    CorpusManifest m;
    m.days = 2;
    m.day_span = {9 * kHourSeconds, 11 * kHourSeconds};
    m.cameras = {{"ego1", CameraKind::ego, "ann"}, {"exo1", CameraKind::exo, std::nullopt},
                 {"exo2", CameraKind::exo, std::nullopt}};
    m.roster = {{"ann", "Ann"}, {"ben", "Ben"}, {"cat", "Cat"}};
    m.embedding_dim = 3;
    return m;
}

/// Window of `minutes` starting at day `day`, hh:mm.
inline TimeWindow at(int day, int hh, int mm, int minutes = 5) {
    Seconds s = day_start(day) + hh * kHourSeconds + mm * 60;
    return {s, s + minutes * 60};
}

inline LaneRecord transcript(const CameraId& cam, TimeWindow w, std::string text,
                             std::vector<SpeakerCandidate> candidates = {},
                             std::optional<PersonId> speaker = std::nullopt) {
    return {cam, w, TranscriptPayload{std::move(text), std::move(candidates), std::move(speaker)}};
}

inline LaneRecord caption(const CameraId& cam, TimeWindow w, std::string text,
                          CaptionKind kind = CaptionKind::scene_300s) {
    return {cam, w, CaptionPayload{std::move(text), kind}};
}

inline LaneRecord object(const CameraId& cam, TimeWindow w, std::string label, std::string region = "table",
                         double score = 0.9) {
    return {cam, w, ObjectPayload{std::move(label), std::move(region), score}};
}

inline LaneRecord identity(const CameraId& cam, TimeWindow w, PersonId person,
                           std::vector<double> body = {1, 0, 0}, std::vector<double> face = {0, 1, 0}) {
    return {cam, w, IdentityPayload{std::move(person), std::move(body), std::move(face), 0.9}};
}

inline LaneRecord action(const CameraId& cam, TimeWindow w, std::string verb, PersonId actor,
                         std::vector<PersonId> co = {}) {
    return {cam, w, ActionPayload{std::move(verb), std::move(actor), std::move(co)}};
}

}  // namespace lvqa::testing
