#include "lvqa/lane_store.hpp"

#include <algorithm>
#include <cmath>

#include "lvqa/errors.hpp"
#include "lvqa/text.hpp"

namespace lvqa {

LaneDatabase::LaneDatabase(CorpusManifest manifest, std::map<Lane, std::vector<LaneRecord>> lanes)
    : manifest_(std::move(manifest)), lanes_(std::move(lanes)) {
    for (Lane l : kAllLanes) {
        auto& recs = lanes_[l];
        for (const auto& r : recs) {
            if (r.lane() != l) throw ValidationError("record filed under lane " + to_string(l));
        }
        sort_records(recs);
        all_.insert(all_.end(), recs.begin(), recs.end());
    }
    sort_records(all_);
}

LaneDatabase LaneDatabase::load(const std::filesystem::path& dir) {
    auto manifest = load_manifest(dir / "manifest.json");
    std::map<Lane, std::vector<LaneRecord>> lanes;
    for (Lane l : kAllLanes) {
        auto path = dir / "lanes" / (to_string(l) + ".jsonl");
        if (std::filesystem::exists(path)) lanes[l] = load_lane(path, manifest);
    }
    return LaneDatabase(std::move(manifest), std::move(lanes));
}

void LaneDatabase::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir / "lanes");
    save_manifest(manifest_, dir / "manifest.json");
    for (Lane l : kAllLanes) save_lane(lane(l), dir / "lanes" / (to_string(l) + ".jsonl"));
}

const std::vector<LaneRecord>& LaneDatabase::lane(Lane lane) const {
    static const std::vector<LaneRecord> empty;
    auto it = lanes_.find(lane);
    return it == lanes_.end() ? empty : it->second;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("embedding lengths differ: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

GateDecision gate_identity_propagation(const LaneRecord& candidate, const LaneRecord& anchor,
                                       const std::map<PersonId, std::vector<double>>& centroids,
                                       GateThresholds thresholds) {
    const auto& cand = candidate.as<IdentityPayload>();
    const auto& anch = anchor.as<IdentityPayload>();
    auto it = centroids.find(anch.person);
    if (it == centroids.end()) throw NotFound("no face centroid for " + anch.person);
    double body = cosine_similarity(cand.body, anch.body);
    double face = cosine_similarity(cand.face, it->second);
    if (body >= thresholds.body && face >= thresholds.face) return GateDecision::accept(anch.person);
    return GateDecision::reject();
}

std::vector<LaneRecord> resolve_speakers_consensus(std::span<const LaneRecord> transcripts,
                                                   std::span<const LaneRecord> identity,
                                                   const CorpusManifest& manifest) {
    std::vector<LaneRecord> out(transcripts.begin(), transcripts.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!manifest.is_exo(out[i].camera)) continue;
        auto& p = out[i].as<TranscriptPayload>();
        const auto& self = transcripts[i];

        auto heard_elsewhere = [&](const PersonId& person) {
            for (std::size_t k = 0; k < transcripts.size(); ++k) {
                const auto& other = transcripts[k];
                if (k == i || other.camera == self.camera || !overlaps(other.window, self.window)) continue;
                const auto& op = other.as<TranscriptPayload>();
                if (op.speaker == person) return true;
                for (const auto& c : op.candidates) {
                    if (c.person == person) return true;
                }
            }
            return false;
        };
        auto seen = [&](const PersonId& person) {
            for (const auto& id : identity) {
                if (overlaps(id.window, self.window) && id.as<IdentityPayload>().person == person) return true;
            }
            return false;
        };

        const SpeakerCandidate* best = nullptr;
        for (const auto& c : p.candidates) {
            if (!heard_elsewhere(c.person) || !seen(c.person)) continue;
            if (best == nullptr || c.score > best->score ||
                (c.score == best->score && c.person < best->person)) {
                best = &c;
            }
        }
        p.speaker = best ? std::optional<PersonId>(best->person) : std::nullopt;
    }
    return out;
}

bool mentions_verb(std::string_view text, std::string_view verb) {
    auto verb_tokens = tokenize(verb);
    if (verb_tokens.size() != 1) return normalize_text(text).find(normalize_text(verb)) != std::string::npos;
    const auto& stem = verb_tokens.front();
    // "bake" also matches "baking".
    std::string dropped = stem.size() > 2 && stem.back() == 'e' ? stem.substr(0, stem.size() - 1) + "ing" : "";
    for (const auto& t : tokenize(text)) {
        if (t.starts_with(stem) || (!dropped.empty() && t.starts_with(dropped))) return true;
    }
    return false;
}

std::vector<ActionTuple> build_action_timeline(std::span<const LaneRecord> captions,
                                               std::span<const LaneRecord> identity,
                                               const std::set<std::string>& verb_lexicon) {
    std::vector<ActionTuple> out;
    for (const auto& cap : captions) {
        const auto& cp = cap.as<CaptionPayload>();
        if (cp.kind != CaptionKind::action_verb) continue;

        // Actor: best face score on the caption's own camera, tie -> smallest id.
        const IdentityPayload* actor = nullptr;
        for (const auto& id : identity) {
            if (id.camera != cap.camera || !overlaps(id.window, cap.window)) continue;
            const auto& ip = id.as<IdentityPayload>();
            if (actor == nullptr || ip.face_score > actor->face_score ||
                (ip.face_score == actor->face_score && ip.person < actor->person)) {
                actor = &ip;
            }
        }
        if (actor == nullptr) continue;

        std::set<PersonId> co;
        for (const auto& id : identity) {
            if (!overlaps(id.window, cap.window)) continue;
            const auto& person = id.as<IdentityPayload>().person;
            if (person != actor->person) co.insert(person);
        }
        for (const auto& verb : verb_lexicon) {
            if (mentions_verb(cp.text, verb)) out.push_back({cap.window, verb, actor->person, co});
        }
    }
    return out;
}

}  // namespace lvqa
