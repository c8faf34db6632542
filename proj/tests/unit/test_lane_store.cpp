#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "lvqa/errors.hpp"
#include "lvqa/lane_store.hpp"

using namespace lvqa;
using namespace lvqa::testing;

namespace {

nlohmann::json manifest_json(int ego, int exo, int persons) {
    CorpusManifest m;
    m.days = 4;
    m.day_span = {8 * kHourSeconds, 21 * kHourSeconds};
    for (int p = 1; p <= persons; ++p) m.roster.push_back({"p" + std::to_string(p), "P" + std::to_string(p)});
    for (int i = 1; i <= ego; ++i) m.cameras.push_back({"ego" + std::to_string(i), CameraKind::ego, "p" + std::to_string(i)});
    for (int i = 1; i <= exo; ++i) m.cameras.push_back({"exo" + std::to_string(i), CameraKind::exo, std::nullopt});
    m.embedding_dim = 4;
    return to_json(m);
}

std::vector<double> unit_at_angle(double cosine) {
    return {cosine, std::sqrt(1.0 - cosine * cosine), 0.0};
}

}  // namespace

TEST(Manifest, FifteenCamerasTwelvePersonsLoads) {
    TempDir dir;
    write_file(dir / "manifest.json", manifest_json(10, 5, 12).dump());
    auto m = load_manifest(dir / "manifest.json");
    EXPECT_EQ(m.cameras.size(), 15u);
    EXPECT_EQ(m.roster.size(), 12u);
    EXPECT_EQ(std::count_if(m.cameras.begin(), m.cameras.end(), [](const auto& c) { return c.kind == CameraKind::ego; }), 10);
}

TEST(Manifest, EmptyRosterRejected) {
    TempDir dir;
    auto j = manifest_json(0, 2, 1);
    j["roster"] = nlohmann::json::array();
    write_file(dir / "manifest.json", j.dump());
    EXPECT_THROW(load_manifest(dir / "manifest.json"), ValidationError);
}

TEST(Manifest, DuplicateCameraIdRejected) {
    TempDir dir;
    auto j = manifest_json(0, 2, 1);
    j["cameras"][1]["id"] = "exo1";
    write_file(dir / "manifest.json", j.dump());
    EXPECT_THROW(load_manifest(dir / "manifest.json"), ValidationError);
}

TEST(Manifest, EgoWithoutRosterWearerRejected) {
    auto m = small_manifest();
    m.cameras[0].wearer = "nobody";
    EXPECT_THROW(m.validate(), ValidationError);
    m.cameras[0].wearer.reset();
    EXPECT_THROW(m.validate(), ValidationError);
}

TEST(Manifest, InvertedDaySpanRejected) {
    auto m = small_manifest();
    m.day_span = {11 * kHourSeconds, 9 * kHourSeconds};
    EXPECT_THROW(m.validate(), ValidationError);
}

TEST(Manifest, MalformedFileIsParseError) {
    TempDir dir;
    write_file(dir / "manifest.json", "{\"days\": 4,");
    EXPECT_THROW(load_manifest(dir / "manifest.json"), ParseError);
}

TEST(Manifest, RoundTrip) {
    TempDir dir;
    auto m = small_manifest();
    save_manifest(m, dir / "manifest.json");
    EXPECT_EQ(load_manifest(dir / "manifest.json"), m);
}

TEST(LoadLane, ThreeTranscriptsSortedByStart) {
    TempDir dir;
    auto m = small_manifest();
    std::string body;
    for (int mm : {40, 10, 25}) body += to_json(transcript("exo1", at(1, 9, mm), "line " + std::to_string(mm))).dump() + "\n";
    write_file(dir / "transcripts.jsonl", body);
    auto records = load_lane(dir / "transcripts.jsonl", m);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[0].as<TranscriptPayload>().text, "line 10");
    EXPECT_EQ(records[1].as<TranscriptPayload>().text, "line 25");
    EXPECT_EQ(records[2].as<TranscriptPayload>().text, "line 40");
}

TEST(LoadLane, UnknownCameraRejected) {
    TempDir dir;
    write_file(dir / "t.jsonl", to_json(transcript("ghost", at(1, 9, 0), "hi")).dump() + "\n");
    EXPECT_THROW(load_lane(dir / "t.jsonl", small_manifest()), ValidationError);
}

TEST(LoadLane, CaptionKindMustBeOneOfFive) {
    TempDir dir;
    auto m = small_manifest();
    auto ok = to_json(caption("exo1", at(1, 9, 0), "a room"));
    ASSERT_EQ(ok["caption_kind"], "scene_300s");
    write_file(dir / "ok.jsonl", ok.dump() + "\n");
    EXPECT_EQ(load_lane(dir / "ok.jsonl", m).size(), 1u);
    auto bad = ok;
    bad["caption_kind"] = "scene_42s";
    write_file(dir / "bad.jsonl", bad.dump() + "\n");
    EXPECT_THROW(load_lane(dir / "bad.jsonl", m), ValidationError);
}

TEST(LoadLane, AllFiveCaptionKindsAccepted) {
    for (auto kind : {CaptionKind::scene_300s, CaptionKind::narrative_1800s, CaptionKind::action_verb, CaptionKind::av_joint,
                      CaptionKind::reasoning}) {
        EXPECT_NO_THROW(validate_record(caption("exo1", at(1, 9, 0), "x", kind), small_manifest()));
        EXPECT_EQ(caption_kind_from_string(to_string(kind)), kind);
    }
}

TEST(LoadLane, ParseErrorCarriesLineNumber) {
    TempDir dir;
    std::string body = to_json(transcript("exo1", at(1, 9, 0), "fine")).dump() + "\n{not json\n";
    write_file(dir / "t.jsonl", body);
    try {
        load_lane(dir / "t.jsonl", small_manifest());
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(LoadLane, RecordInvariants) {
    auto m = small_manifest();
    EXPECT_THROW(validate_record(transcript("exo1", at(1, 8, 0), "early"), m), ValidationError);
    EXPECT_THROW(validate_record(transcript("exo1", at(3, 9, 0), "day three"), m), ValidationError);
    EXPECT_THROW(validate_record(object("exo1", at(1, 9, 0), "mug", "table", 1.5), m), ValidationError);
    EXPECT_THROW(validate_record(identity("exo1", at(1, 9, 0), "ann", {1, 0}), m), ValidationError);
    EXPECT_THROW(validate_record(identity("exo1", at(1, 9, 0), "zed"), m), ValidationError);
    EXPECT_THROW(validate_record(transcript("exo1", {100, 100}, "empty window"), m), ValidationError);
    EXPECT_THROW(validate_record(action("exo1", at(1, 9, 0), "chop", "ann", {"ann"}), m), ValidationError);
    EXPECT_NO_THROW(validate_record(action("exo1", at(1, 9, 0), "chop", "ann", {"ben"}), m));
}

TEST(LoadLane, RoundTripIsByteStable) {
    TempDir dir;
    auto m = small_manifest();
    std::vector<LaneRecord> records = {transcript("exo1", at(1, 9, 0), "Día 4: ¿listos?", {{"ann", 0.5}}, "ann"),
                                       transcript("ego1", at(1, 9, 5), "hello", {})};
    save_lane(records, dir / "a.jsonl");
    auto loaded = load_lane(dir / "a.jsonl", m);
    EXPECT_EQ(loaded, records);
    save_lane(loaded, dir / "b.jsonl");
    EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
}

TEST(LaneDatabase, SaveLoadRoundTrip) {
    TempDir dir;
    auto m = small_manifest();
    LaneDatabase db(m, {{Lane::transcript, {transcript("exo1", at(1, 9, 0), "hi")}},
                        {Lane::identity, {identity("exo1", at(1, 9, 0), "ann")}}});
    db.save(dir.path());
    auto back = LaneDatabase::load(dir.path());
    EXPECT_EQ(back.manifest(), m);
    EXPECT_EQ(back.size(), 2u);
    EXPECT_TRUE(back.lane(Lane::caption).empty());
}

// ---------------------------------------------------------------- identity gate

TEST(IdentityGate, SelfSimilarityPropagates) {
    std::map<PersonId, std::vector<double>> centroids = {{"ann", {0, 1, 0}}};
    auto anchor = identity("ego1", at(1, 9, 0), "ann", {1, 0, 0}, {0, 1, 0});
    auto cand = identity("exo1", at(1, 9, 0), "ben", {1, 0, 0}, {0, 1, 0});
    auto d = gate_identity_propagation(cand, anchor, centroids);
    EXPECT_TRUE(d.propagate);
    EXPECT_EQ(d.person, "ann");
}

TEST(IdentityGate, OrthogonalFaceRejects) {
    std::map<PersonId, std::vector<double>> centroids = {{"ann", {0, 1, 0}}};
    auto anchor = identity("ego1", at(1, 9, 0), "ann", {1, 0, 0}, {0, 1, 0});
    auto cand = identity("exo1", at(1, 9, 0), "ben", {1, 0, 0}, {0, 0, 1});
    EXPECT_FALSE(gate_identity_propagation(cand, anchor, centroids).propagate);
}

TEST(IdentityGate, HandBuiltCosinesJustAboveThresholds) {
    std::map<PersonId, std::vector<double>> centroids = {{"ann", {1, 0, 0}}};
    auto anchor = identity("ego1", at(1, 9, 0), "ann", {1, 0, 0}, {1, 0, 0});
    auto cand = identity("exo1", at(1, 9, 0), "ben", unit_at_angle(0.82), unit_at_angle(0.71));
    double body = cosine_similarity(cand.as<IdentityPayload>().body, anchor.as<IdentityPayload>().body);
    double face = cosine_similarity(cand.as<IdentityPayload>().face, centroids["ann"]);
    EXPECT_NEAR(body, 0.82, 1e-12);
    EXPECT_NEAR(face, 0.71, 1e-12);
    EXPECT_TRUE(gate_identity_propagation(cand, anchor, centroids, {0.8, 0.7}).propagate);
}

TEST(IdentityGate, Monotone) {
    std::map<PersonId, std::vector<double>> centroids = {{"ann", {1, 0, 0}}};
    auto anchor = identity("ego1", at(1, 9, 0), "ann", {1, 0, 0}, {1, 0, 0});
    for (double cb : {0.5, 0.79, 0.8, 0.9, 1.0}) {
        for (double cf : {0.4, 0.69, 0.7, 0.95}) {
            auto cand = identity("exo1", at(1, 9, 0), "ben", unit_at_angle(cb), unit_at_angle(cf));
            bool low = gate_identity_propagation(cand, anchor, centroids, {0.6, 0.5}).propagate;
            for (GateThresholds raised : {GateThresholds{0.8, 0.5}, GateThresholds{0.6, 0.7}, GateThresholds{0.8, 0.7}}) {
                bool high = gate_identity_propagation(cand, anchor, centroids, raised).propagate;
                EXPECT_TRUE(!high || low) << cb << " " << cf;
            }
        }
    }
}

TEST(IdentityGate, DimensionMismatch) {
    std::map<PersonId, std::vector<double>> centroids = {{"ann", {1, 0, 0}}};
    auto anchor = identity("ego1", at(1, 9, 0), "ann", {1, 0, 0}, {1, 0, 0});
    auto cand = identity("exo1", at(1, 9, 0), "ben", {1, 0}, {1, 0, 0});
    EXPECT_THROW(gate_identity_propagation(cand, anchor, centroids), DimensionMismatch);
}

// ---------------------------------------------------------------- speaker consensus

TEST(SpeakerConsensus, CorroboratedCandidateWins) {
    auto m = small_manifest();
    m.roster.push_back({"p3", "P3"});
    m.roster.push_back({"p7", "P7"});
    std::vector<LaneRecord> ts = {
        transcript("exo1", at(1, 9, 0), "pass the salt", {{"p3", 0.6}, {"p7", 0.9}}),
        transcript("ego1", at(1, 9, 2), "pass the salt", {{"p3", 0.8}}, "p3"),
        transcript("exo2", at(1, 9, 30), "later", {{"p7", 0.9}}),
    };
    std::vector<LaneRecord> ids = {identity("ego1", at(1, 9, 0), "p3"), identity("exo2", at(1, 9, 30), "p7")};
    auto out = resolve_speakers_consensus(ts, ids, m);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].as<TranscriptPayload>().speaker, "p3");
}

TEST(SpeakerConsensus, UncorroboratedOnlyCandidateIsNull) {
    auto m = small_manifest();
    std::vector<LaneRecord> ts = {transcript("exo1", at(1, 9, 0), "hello", {{"ben", 0.9}}, "ben")};
    std::vector<LaneRecord> ids = {identity("exo1", at(1, 9, 0), "ben")};
    auto out = resolve_speakers_consensus(ts, ids, m);
    EXPECT_EQ(out[0].as<TranscriptPayload>().speaker, std::nullopt);
}

TEST(SpeakerConsensus, EgoPassesThrough) {
    auto m = small_manifest();
    std::vector<LaneRecord> ts = {transcript("ego1", at(1, 9, 0), "hello", {{"ben", 0.9}}, "cat")};
    auto out = resolve_speakers_consensus(ts, {}, m);
    EXPECT_EQ(out[0], ts[0]);
}

TEST(SpeakerConsensus, TieGoesToSmallestId) {
    auto m = small_manifest();
    std::vector<LaneRecord> ts = {
        transcript("exo1", at(1, 9, 0), "hi", {{"cat", 0.7}, {"ben", 0.7}}),
        transcript("exo2", at(1, 9, 0), "hi", {{"cat", 0.7}, {"ben", 0.7}}),
    };
    std::vector<LaneRecord> ids = {identity("exo1", at(1, 9, 0), "ben"), identity("exo2", at(1, 9, 0), "cat")};
    auto out = resolve_speakers_consensus(ts, ids, m);
    EXPECT_EQ(out[0].as<TranscriptPayload>().speaker, "ben");
    EXPECT_EQ(out[1].as<TranscriptPayload>().speaker, "ben");
}

/// Exhaustive oracle: restriction by overlap scan, then score desc / id asc.
TEST(SpeakerConsensus, MatchesExhaustiveScanAndStaysInCandidates) {
    auto m = small_manifest();
    std::mt19937_64 rng(5);
    const std::vector<PersonId> people = {"ann", "ben", "cat"};
    const std::vector<CameraId> cams = {"ego1", "exo1", "exo2"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<LaneRecord> ts, ids;
        for (int i = 0; i < 5; ++i) {
            std::vector<SpeakerCandidate> cands;
            for (const auto& p : people) {
                if (rng() % 2) cands.push_back({p, static_cast<double>(rng() % 4) / 4.0});
            }
            ts.push_back(transcript(cams[rng() % 3], at(1, 9, static_cast<int>(rng() % 4) * 3, 5), "t", cands));
        }
        for (int i = 0; i < 3; ++i) ids.push_back(identity(cams[rng() % 3], at(1, 9, static_cast<int>(rng() % 12), 5), people[rng() % 3]));
        auto out = resolve_speakers_consensus(ts, ids, m);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const auto& tp = ts[i].as<TranscriptPayload>();
            if (!m.is_exo(ts[i].camera)) {
                EXPECT_EQ(out[i], ts[i]);
                continue;
            }
            std::optional<SpeakerCandidate> best;
            for (const auto& c : tp.candidates) {
                bool heard = false, seen = false;
                for (std::size_t k = 0; k < ts.size(); ++k) {
                    if (k == i || ts[k].camera == ts[i].camera || !overlaps(ts[k].window, ts[i].window)) continue;
                    const auto& op = ts[k].as<TranscriptPayload>();
                    heard = heard || op.speaker == c.person ||
                            std::any_of(op.candidates.begin(), op.candidates.end(), [&](const auto& x) { return x.person == c.person; });
                }
                for (const auto& id : ids) seen = seen || (id.as<IdentityPayload>().person == c.person && overlaps(id.window, ts[i].window));
                if (!heard || !seen) continue;
                if (!best || c.score > best->score || (c.score == best->score && c.person < best->person)) best = c;
            }
            auto got = out[i].as<TranscriptPayload>().speaker;
            EXPECT_EQ(got, best ? std::optional<PersonId>(best->person) : std::nullopt) << "trial " << trial;
            if (got) {
                EXPECT_TRUE(std::any_of(tp.candidates.begin(), tp.candidates.end(), [&](const auto& c) { return c.person == *got; }));
            }
        }
    }
}

// ---------------------------------------------------------------- action timeline

TEST(ActionTimeline, SingleVerb) {
    std::vector<LaneRecord> caps = {caption("exo1", at(1, 9, 0), "Alice chops vegetables", CaptionKind::action_verb)};
    std::vector<LaneRecord> ids = {identity("exo1", at(1, 9, 0), "ann")};
    auto tl = build_action_timeline(caps, ids, {"chop"});
    ASSERT_EQ(tl.size(), 1u);
    EXPECT_EQ(tl[0], (ActionTuple{at(1, 9, 0), "chop", "ann", {}}));
}

TEST(ActionTimeline, CoActorFromOverlappingWindow) {
    std::vector<LaneRecord> caps = {caption("exo1", at(1, 9, 0), "Alice chops vegetables", CaptionKind::action_verb)};
    std::vector<LaneRecord> ids = {identity("exo1", at(1, 9, 0), "ann"), identity("exo2", at(1, 9, 3), "ben")};
    auto tl = build_action_timeline(caps, ids, {"chop"});
    ASSERT_EQ(tl.size(), 1u);
    EXPECT_EQ(tl[0].co_actors, (std::set<PersonId>{"ben"}));
}

TEST(ActionTimeline, TwoVerbsTwoTuples) {
    std::vector<LaneRecord> caps = {caption("exo1", at(1, 9, 0), "Ann chops onions and washes a pan", CaptionKind::action_verb)};
    std::vector<LaneRecord> ids = {identity("exo1", at(1, 9, 0), "ann")};
    auto tl = build_action_timeline(caps, ids, {"chop", "wash", "read"});
    ASSERT_EQ(tl.size(), 2u);
    EXPECT_EQ(tl[0].verb, "chop");
    EXPECT_EQ(tl[1].verb, "wash");
    EXPECT_EQ(tl[0].span, tl[1].span);
    EXPECT_EQ(tl[0].actor, tl[1].actor);
}

TEST(ActionTimeline, UnresolvedActorDroppedAndOtherKindsIgnored) {
    std::vector<LaneRecord> caps = {caption("exo1", at(1, 9, 0), "Ann chops", CaptionKind::action_verb),
                                    caption("exo2", at(1, 9, 0), "Ann chops", CaptionKind::scene_300s)};
    std::vector<LaneRecord> ids = {identity("exo2", at(1, 9, 0), "ann")};
    EXPECT_TRUE(build_action_timeline(caps, ids, {"chop"}).empty());
}

TEST(ActionTimeline, BoundedAndSpanPreserving) {
    std::vector<LaneRecord> caps;
    for (int i = 0; i < 6; ++i) {
        caps.push_back(caption("exo1", at(1, 9, i * 5), i % 2 ? "bakes and serves" : "reads", CaptionKind::action_verb));
    }
    std::vector<LaneRecord> ids = {identity("exo1", at(1, 9, 0, 60), "ann")};
    std::set<std::string> lex = {"bake", "serve", "read", "chop"};
    auto tl = build_action_timeline(caps, ids, lex);
    EXPECT_LE(tl.size(), caps.size() * lex.size());
    EXPECT_EQ(tl.size(), 9u);
    for (const auto& t : tl) {
        EXPECT_TRUE(std::any_of(caps.begin(), caps.end(), [&](const auto& c) { return c.window == t.span; }));
        EXPECT_FALSE(t.co_actors.contains(t.actor));
    }
}

TEST(MentionsVerb, PrefixAndDroppedE) {
    EXPECT_TRUE(mentions_verb("She chops onions", "chop"));
    EXPECT_TRUE(mentions_verb("baking bread", "bake"));
    EXPECT_TRUE(mentions_verb("Serving plates", "serve"));
    EXPECT_FALSE(mentions_verb("a chair", "chop"));
    EXPECT_FALSE(mentions_verb("unreadable", "read"));
}
