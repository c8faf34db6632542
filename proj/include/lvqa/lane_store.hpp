#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lvqa/lane_record.hpp"
#include "lvqa/manifest.hpp"

namespace lvqa {

/// The five lanes of one corpus, immutable after construction.
class LaneDatabase {
public:
    LaneDatabase() = default;
    LaneDatabase(CorpusManifest manifest, std::map<Lane, std::vector<LaneRecord>> lanes);

    /// Loads `<dir>/manifest.json` and `<dir>/lanes/<lane>.jsonl`; absent lane files are empty.
    static LaneDatabase load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    const CorpusManifest& manifest() const { return manifest_; }
    const std::vector<LaneRecord>& lane(Lane lane) const;
    /// All records of all lanes, sorted by (start, camera).
    const std::vector<LaneRecord>& all() const { return all_; }
    std::size_t size() const { return all_.size(); }

private:
    CorpusManifest manifest_;
    std::map<Lane, std::vector<LaneRecord>> lanes_;
    std::vector<LaneRecord> all_;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct GateThresholds {
    double body = 0.80;
    double face = 0.70;
};

struct GateDecision {
    bool propagate = false;
    PersonId person;  // set when propagate

    static GateDecision accept(PersonId p) { return {true, std::move(p)}; }
    static GateDecision reject() { return {}; }
};

/// Cross-camera identity propagation: the candidate inherits the anchor's
/// person only if its body matches the anchor's body and its face matches
/// that person's centroid.
GateDecision gate_identity_propagation(const LaneRecord& candidate, const LaneRecord& anchor,
                                       const std::map<PersonId, std::vector<double>>& centroids,
                                       GateThresholds thresholds = {});

/// Fixed-camera speaker consensus. Exo transcripts keep only candidates
/// corroborated by an overlapping transcript on another camera and by the
/// identity lane; ego transcripts pass through unchanged.
std::vector<LaneRecord> resolve_speakers_consensus(std::span<const LaneRecord> transcripts,
                                                   std::span<const LaneRecord> identity,
                                                   const CorpusManifest& manifest);

struct ActionTuple {
    TimeWindow span;
    std::string verb;
    PersonId actor;
    std::set<PersonId> co_actors;

    bool operator==(const ActionTuple&) const = default;
};

/// Extractive action timeline from action_verb captions.
std::vector<ActionTuple> build_action_timeline(std::span<const LaneRecord> captions,
                                               std::span<const LaneRecord> identity,
                                               const std::set<std::string>& verb_lexicon);

/// Whether `verb` occurs in `text` as the prefix of some token ("chop" in "chops"),
/// allowing the dropped final e of gerunds ("bake" in "baking").
bool mentions_verb(std::string_view text, std::string_view verb);

}  // namespace lvqa
