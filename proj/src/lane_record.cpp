#include "lvqa/lane_record.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "lvqa/errors.hpp"

namespace lvqa {
namespace {

constexpr std::pair<Lane, std::string_view> kLaneNames[] = {
    {Lane::identity, "identity"}, {Lane::caption, "caption"}, {Lane::object, "object"},
    {Lane::transcript, "transcript"}, {Lane::action, "action"}};

constexpr std::pair<CaptionKind, std::string_view> kCaptionKinds[] = {
    {CaptionKind::scene_300s, "scene_300s"},
    {CaptionKind::narrative_1800s, "narrative_1800s"},
    {CaptionKind::action_verb, "action_verb"},
    {CaptionKind::av_joint, "av_joint"},
    {CaptionKind::reasoning, "reasoning"}};

void check_score(double s, const char* what) {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw ValidationError(std::string(what) + " must lie in [0,1]");
    }
}

void check_person(const CorpusManifest& m, const PersonId& p, const char* what) {
    if (!m.has_person(p)) throw ValidationError(std::string(what) + " '" + p + "' not in roster");
}

}  // namespace

std::string to_string(Lane lane) {
    for (auto [l, name] : kLaneNames) {
        if (l == lane) return std::string(name);
    }
    return "?";
}

Lane lane_from_string(std::string_view s) {
    for (auto [l, name] : kLaneNames) {
        if (name == s) return l;
    }
    throw ValidationError("unknown lane '" + std::string(s) + "'");
}

std::string to_string(CaptionKind kind) {
    for (auto [k, name] : kCaptionKinds) {
        if (k == kind) return std::string(name);
    }
    return "?";
}

std::optional<CaptionKind> caption_kind_from_string(std::string_view s) {
    for (auto [k, name] : kCaptionKinds) {
        if (name == s) return k;
    }
    return std::nullopt;
}

Lane LaneRecord::lane() const {
    return std::visit(
        [](const auto& p) -> Lane {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, IdentityPayload>) return Lane::identity;
            else if constexpr (std::is_same_v<P, CaptionPayload>) return Lane::caption;
            else if constexpr (std::is_same_v<P, ObjectPayload>) return Lane::object;
            else if constexpr (std::is_same_v<P, TranscriptPayload>) return Lane::transcript;
            else return Lane::action;
        },
        payload);
}

LaneRecord record_from_json(const nlohmann::json& j) {
    LaneRecord r;
    Lane lane = lane_from_string(j.at("lane").get<std::string>());
    r.camera = j.at("camera").get<std::string>();
    r.window = {j.at("start").get<Seconds>(), j.at("end").get<Seconds>()};
    switch (lane) {
        case Lane::identity: {
            IdentityPayload p;
            p.person = j.at("person").get<std::string>();
            p.body = j.at("body").get<std::vector<double>>();
            p.face = j.at("face").get<std::vector<double>>();
            p.face_score = j.at("face_score").get<double>();
            r.payload = std::move(p);
            break;
        }
        case Lane::caption: {
            CaptionPayload p;
            p.text = j.at("text").get<std::string>();
            auto kind = j.at("caption_kind").get<std::string>();
            auto parsed = caption_kind_from_string(kind);
            if (!parsed) throw ValidationError("caption_kind '" + kind + "' is not one of the five kinds");
            p.kind = *parsed;
            r.payload = std::move(p);
            break;
        }
        case Lane::object: {
            ObjectPayload p;
            p.label = j.at("label").get<std::string>();
            p.region = j.at("region").get<std::string>();
            p.score = j.at("score").get<double>();
            r.payload = std::move(p);
            break;
        }
        case Lane::transcript: {
            TranscriptPayload p;
            p.text = j.at("text").get<std::string>();
            for (const auto& c : j.at("candidates")) {
                p.candidates.push_back({c.at("person").get<std::string>(), c.at("score").get<double>()});
            }
            if (j.contains("speaker") && !j.at("speaker").is_null()) {
                p.speaker = j.at("speaker").get<std::string>();
            }
            r.payload = std::move(p);
            break;
        }
        case Lane::action: {
            ActionPayload p;
            p.verb = j.at("verb").get<std::string>();
            p.actor = j.at("actor").get<std::string>();
            p.co_actors = j.at("co_actors").get<std::vector<std::string>>();
            r.payload = std::move(p);
            break;
        }
    }
    return r;
}

nlohmann::json to_json(const LaneRecord& r) {
    nlohmann::json j;
    j["lane"] = to_string(r.lane());
    j["camera"] = r.camera;
    j["start"] = r.window.start;
    j["end"] = r.window.end;
    std::visit(
        [&j](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, IdentityPayload>) {
                j["person"] = p.person;
                j["body"] = p.body;
                j["face"] = p.face;
                j["face_score"] = p.face_score;
            } else if constexpr (std::is_same_v<P, CaptionPayload>) {
                j["text"] = p.text;
                j["caption_kind"] = to_string(p.kind);
            } else if constexpr (std::is_same_v<P, ObjectPayload>) {
                j["label"] = p.label;
                j["region"] = p.region;
                j["score"] = p.score;
            } else if constexpr (std::is_same_v<P, TranscriptPayload>) {
                j["text"] = p.text;
                auto cands = nlohmann::json::array();
                for (const auto& c : p.candidates) cands.push_back({{"person", c.person}, {"score", c.score}});
                j["candidates"] = cands;
                j["speaker"] = p.speaker ? nlohmann::json(*p.speaker) : nlohmann::json(nullptr);
            } else {
                j["verb"] = p.verb;
                j["actor"] = p.actor;
                j["co_actors"] = p.co_actors;
            }
        },
        r.payload);
    return j;
}

void validate_record(const LaneRecord& r, const CorpusManifest& m) {
    if (m.find_camera(r.camera) == nullptr) {
        throw ValidationError("camera '" + r.camera + "' not in manifest");
    }
    if (!(0 <= r.window.start && r.window.start < r.window.end)) {
        throw ValidationError("window requires 0 <= start < end");
    }
    if (!m.covers(r.window)) throw ValidationError("window lies outside the manifest day span");
    const auto dim = static_cast<std::size_t>(m.embedding_dim);
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, IdentityPayload>) {
                check_person(m, p.person, "identity person");
                if (p.body.size() != dim || p.face.size() != dim) {
                    throw ValidationError("embedding dimension differs from manifest embedding_dim");
                }
                check_score(p.face_score, "face_score");
            } else if constexpr (std::is_same_v<P, ObjectPayload>) {
                if (p.label.empty()) throw ValidationError("object label is empty");
                check_score(p.score, "object score");
            } else if constexpr (std::is_same_v<P, TranscriptPayload>) {
                for (const auto& c : p.candidates) {
                    check_person(m, c.person, "speaker candidate");
                    check_score(c.score, "candidate score");
                }
                if (p.speaker) check_person(m, *p.speaker, "speaker");
            } else if constexpr (std::is_same_v<P, ActionPayload>) {
                if (p.verb.empty()) throw ValidationError("action verb is empty");
                check_person(m, p.actor, "actor");
                for (const auto& c : p.co_actors) {
                    check_person(m, c, "co-actor");
                    if (c == p.actor) throw ValidationError("actor listed among co_actors");
                }
            }
        },
        r.payload);
}

void sort_records(std::vector<LaneRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const LaneRecord& a, const LaneRecord& b) {
        if (a.window.start != b.window.start) return a.window.start < b.window.start;
        return a.camera < b.camera;
    });
}

std::vector<LaneRecord> load_lane(const std::filesystem::path& path, const CorpusManifest& m) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lane file " + path.string());
    std::vector<LaneRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        LaneRecord r;
        try {
            r = record_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            validate_record(r, m);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    sort_records(out);
    return out;
}

void save_lane(const std::vector<LaneRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::string render_record(const LaneRecord& r) {
    return std::visit(
        [](const auto& p) -> std::string {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, IdentityPayload>) {
                return p.person + " visible";
            } else if constexpr (std::is_same_v<P, CaptionPayload>) {
                return p.text;
            } else if constexpr (std::is_same_v<P, ObjectPayload>) {
                if (p.is_ocr()) return "on-screen text: " + p.label;
                return p.label + " (" + p.region + ")";
            } else if constexpr (std::is_same_v<P, TranscriptPayload>) {
                return (p.speaker ? *p.speaker : std::string("unknown")) + " says: " + p.text;
            } else {
                std::string s = p.actor + " " + p.verb;
                if (!p.co_actors.empty()) {
                    s += " with";
                    for (const auto& c : p.co_actors) s += " " + c;
                }
                return s;
            }
        },
        r.payload);
}

}  // namespace lvqa
