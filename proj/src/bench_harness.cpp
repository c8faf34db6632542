#include "lvqa/bench_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "lvqa/errors.hpp"
#include "lvqa/sva_pipeline.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------- world vocabulary

constexpr std::string_view kPersonNames[] = {"Alice", "Bob",  "Carol", "Dave", "Erin",  "Frank",
                                             "Grace", "Heidi", "Ivan", "Judy", "Mallory", "Niaj"};

constexpr std::string_view kCameraPlaces[] = {"kitchen", "living room", "dining room", "study", "laundry",
                                              "porch"};
// Places no camera watches; they give where-questions extra distractors.
constexpr std::string_view kUnwatchedPlaces[] = {"hallway", "garden"};

const std::vector<Activity>& activities() {
    static const std::vector<Activity> kActivities = {
        {"chop", "chopping", "carrot", "carrots"},   {"peel", "peeling", "potato", "potatoes"},
        {"wash", "washing", "mug", "mugs"},          {"fold", "folding", "towel", "towels"},
        {"read", "reading", "book", "books"},        {"paint", "painting", "canvas", "canvases"},
        {"knit", "knitting", "scarf", "scarves"},    {"sort", "sorting", "letter", "letters"},
        {"water", "watering", "plant", "plants"},    {"bake", "baking", "muffin", "muffins"},
        {"build", "building", "puzzle", "puzzles"},  {"pour", "pouring", "glass", "glasses"},
        {"serve", "serving", "plate", "plates"},     {"open", "opening", "parcel", "parcels"},
        {"carry", "carrying", "box", "boxes"},       {"play", "playing", "card", "cards"},
        {"clean", "cleaning", "window", "windows"},  {"stir", "stirring", "pot", "pots"},
        {"cook", "cooking", "egg", "eggs"},          {"mop", "mopping", "tile", "tiles"},
    };
    return kActivities;
}

constexpr std::string_view kRegions[] = {"table-left", "table-right", "counter", "shelf",
                                         "sink",       "floor",       "sofa",    "windowsill"};

constexpr std::string_view kOpeners[] = {"Look", "Okay", "Hey", "Listen", "Right", "Well", "So", "Honestly"};
constexpr std::string_view kModifiers[] = {"blue", "green", "red", "yellow", "striped",
                                           "old",  "new",   "small", "big",  "spare"};
constexpr std::string_view kThings[] = {"umbrella", "kettle", "lamp",   "ladder", "blanket", "radio",
                                        "bucket",   "basket", "candle", "mirror", "clock",   "jacket"};
constexpr std::string_view kPredicates[] = {"needs fixing before dinner", "goes back upstairs later",
                                            "belongs to the neighbours",  "was a birthday present",
                                            "should stay by the door",    "has been missing since Tuesday",
                                            "is finally dry now",         "costs far too much",
                                            "arrived by post",            "will do for tonight"};
constexpr std::string_view kScreenLabels[] = {"RECIPE", "PARCEL", "TICKET", "ORDER",
                                              "INVOICE", "BATCH", "ROUTE", "LOCKER"};

// ---------------------------------------------------------------- portable randomness

/// Draws directly from mt19937_64 output so sequences match across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double between(double lo, double hi) { return lo + (hi - lo) * unit(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

private:
    std::mt19937_64 engine_;
};

double unit_hash(std::string_view data) {
    return static_cast<double>(fnv1a64(data) >> 11) * 0x1.0p-53;
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.between(-1.0, 1.0);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<double> jitter(Rng& rng, const std::vector<double>& centroid, double amount) {
    std::vector<double> v = centroid;
    for (auto& x : v) x += rng.between(-amount, amount);
    return v;
}

std::string join_names(const std::vector<std::string>& names) {
    if (names.size() == 1) return names.front();
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
        out += names[i];
    }
    return out;
}

json activity_json(const Activity& a) {
    return {{"stem", a.stem}, {"gerund", a.gerund}, {"object", a.object}, {"plural", a.plural}};
}

Activity activity_from(const json& j) {
    return {j.at("stem").get<std::string>(), j.at("gerund").get<std::string>(), j.at("object").get<std::string>(),
            j.at("plural").get<std::string>()};
}

std::string label_at(std::size_t i) { return std::string(1, kChoiceLabels[i]); }

// ---------------------------------------------------------------- request parsing for the oracle

std::optional<SubWindowKey> clip_of(const ModelRequest& req) {
    for (const auto& p : req.user_parts) {
        if (p.kind != UserPart::Kind::text || !p.content.starts_with("clip: ")) continue;
        auto rest = std::string_view(p.content).substr(6);
        auto key = parse_key(rest.substr(0, rest.find(' ')));
        if (key && std::holds_alternative<SubWindowKey>(*key)) return std::get<SubWindowKey>(*key);
    }
    return std::nullopt;
}

std::vector<EvidenceSpan> spans_of(const ModelRequest& req) {
    std::vector<EvidenceSpan> out;
    for (const auto& p : req.user_parts) {
        if (p.kind != UserPart::Kind::evidence_ref) continue;
        if (auto s = parse_span(p.content)) out.push_back(std::move(*s));
    }
    return out;
}

std::vector<std::string> candidates_of(const ModelRequest& req) {
    std::vector<std::string> out;
    for (const auto& p : req.user_parts) {
        if (p.kind != UserPart::Kind::evidence_ref) continue;
        if (auto id = parse_candidate_id(p.content)) out.push_back(*id);
    }
    return out;
}

std::optional<std::string> tentative_of(const ModelRequest& req) {
    constexpr std::string_view prefix = "tentative answer from search: ";
    for (const auto& p : req.user_parts) {
        if (p.kind == UserPart::Kind::text && p.content.starts_with(prefix)) return p.content.substr(prefix.size());
    }
    return std::nullopt;
}

std::string region_of(std::string_view rendered) {
    auto open = rendered.rfind(" (");
    if (open == std::string_view::npos || !rendered.ends_with(')')) return "";
    return std::string(rendered.substr(open + 2, rendered.size() - open - 3));
}

}  // namespace

// ---------------------------------------------------------------- config and script

void SyntheticConfig::validate() const {
    if (days < 1) throw ConfigError("synthetic: days must be >= 1");
    if (day_start < 0 || day_end > kDaySeconds || day_start >= day_end) {
        throw ConfigError("synthetic: need 0 <= day_start < day_end <= 86400");
    }
    if (day_start % kSlotSeconds != 0 || day_end % kSlotSeconds != 0) {
        throw ConfigError("synthetic: day bounds must be aligned to 300 s");
    }
    if (day_end - day_start < kHourSeconds) throw ConfigError("synthetic: days must span at least one hour");
    if (exo_cameras < 1 || exo_cameras > static_cast<int>(std::size(kCameraPlaces))) {
        throw ConfigError("synthetic: exo_cameras must be in [1, 6]");
    }
    if (persons < 5 || persons > static_cast<int>(std::size(kPersonNames))) {
        throw ConfigError("synthetic: persons must be in [5, 12]");
    }
    if (persons < exo_cameras + 2) throw ConfigError("synthetic: need at least exo_cameras + 2 persons");
    if (ego_cameras < 0 || ego_cameras > persons) throw ConfigError("synthetic: ego_cameras must be in [0, persons]");
    if (density < 0.0 || density > 1.0) throw ConfigError("synthetic: density must be in [0, 1]");
    if (embedding_dim < 1) throw ConfigError("synthetic: embedding_dim must be >= 1");
}

TimeWindow Happening::window() const {
    Seconds s = day_start(day) + slot * kSlotSeconds;
    return {s, s + kSlotSeconds};
}

std::vector<PersonId> Happening::participants() const {
    std::vector<PersonId> out{actor};
    out.insert(out.end(), co_actors.begin(), co_actors.end());
    return out;
}

const Happening* GroundTruthScript::find(const std::string& id) const {
    for (const auto& h : happenings) {
        if (h.id == id) return &h;
    }
    return nullptr;
}

const Happening* GroundTruthScript::target_of(const std::string& question_id) const {
    auto it = targets.find(question_id);
    return it == targets.end() ? nullptr : find(it->second.happening);
}

std::vector<std::string> GroundTruthScript::signatures(const Happening& h) const {
    std::vector<std::string> out{h.utterance};
    if (h.screen_text) out.push_back(*h.screen_text);
    return out;
}

bool GroundTruthScript::mentions(const Happening& h, std::string_view text) const {
    for (const auto& s : signatures(h)) {
        if (text.find(s) != std::string_view::npos) return true;
    }
    return false;
}

std::string GroundTruthScript::descriptor(const Happening& h) const {
    return h.activity.gerund + " " + h.activity.plural;
}

json GroundTruthScript::to_json() const {
    json hs = json::array();
    for (const auto& h : happenings) {
        hs.push_back({{"id", h.id},
                      {"day", h.day},
                      {"slot", h.slot},
                      {"place", h.place},
                      {"actor", h.actor},
                      {"co_actors", h.co_actors},
                      {"activity", activity_json(h.activity)},
                      {"count", h.count},
                      {"regions", h.regions},
                      {"utterance", h.utterance},
                      {"screen_text", h.screen_text ? json(*h.screen_text) : json(nullptr)},
                      {"visible", h.visible}});
    }
    json ts = json::object();
    for (const auto& [qid, t] : targets) ts[qid] = {{"happening", t.happening}, {"intent", lvqa::to_string(t.intent)}};
    return {{"seed", seed},
            {"config",
             {{"days", config.days},
              {"day_start", config.day_start},
              {"day_end", config.day_end},
              {"ego_cameras", config.ego_cameras},
              {"exo_cameras", config.exo_cameras},
              {"persons", config.persons},
              {"density", config.density},
              {"embedding_dim", config.embedding_dim}}},
            {"happenings", hs},
            {"names", names},
            {"place_cameras", place_cameras},
            {"targets", ts}};
}

GroundTruthScript GroundTruthScript::from_json(const json& j) {
    GroundTruthScript s;
    try {
        s.seed = j.at("seed").get<std::uint64_t>();
        const auto& c = j.at("config");
        s.config.days = c.at("days").get<int>();
        s.config.day_start = c.at("day_start").get<Seconds>();
        s.config.day_end = c.at("day_end").get<Seconds>();
        s.config.ego_cameras = c.at("ego_cameras").get<int>();
        s.config.exo_cameras = c.at("exo_cameras").get<int>();
        s.config.persons = c.at("persons").get<int>();
        s.config.density = c.at("density").get<double>();
        s.config.embedding_dim = c.at("embedding_dim").get<int>();
        for (const auto& h : j.at("happenings")) {
            Happening x;
            x.id = h.at("id").get<std::string>();
            x.day = h.at("day").get<int>();
            x.slot = h.at("slot").get<int>();
            x.place = h.at("place").get<std::string>();
            x.actor = h.at("actor").get<std::string>();
            x.co_actors = h.at("co_actors").get<std::vector<PersonId>>();
            x.activity = activity_from(h.at("activity"));
            x.count = h.at("count").get<int>();
            x.regions = h.at("regions").get<std::vector<std::string>>();
            x.utterance = h.at("utterance").get<std::string>();
            if (!h.at("screen_text").is_null()) x.screen_text = h.at("screen_text").get<std::string>();
            x.visible = h.at("visible").get<std::vector<CameraId>>();
            s.happenings.push_back(std::move(x));
        }
        s.names = j.at("names").get<std::map<PersonId, std::string>>();
        s.place_cameras = j.at("place_cameras").get<std::map<std::string, CameraId>>();
        for (auto& [qid, t] : j.at("targets").items()) {
            s.targets[qid] = {t.at("happening").get<std::string>(), intent_from_string(t.at("intent").get<std::string>())};
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad script: ") + e.what(), 0);
    }
    return s;
}

void SyntheticCorpus::write(const std::filesystem::path& dir) const {
    db.save(dir);
    catalogs.save(dir);
    lexicons.save(dir / "lexicons.json");
    std::ofstream out(dir / "script.json");
    if (!out) throw IoError("cannot write " + (dir / "script.json").string());
    out << script.to_json().dump(2) << '\n';
}

// ---------------------------------------------------------------- corpus

SyntheticCorpus generate_corpus(std::uint64_t seed, const SyntheticConfig& config) {
    config.validate();
    Rng rng(seed);
    const auto dim = static_cast<std::size_t>(config.embedding_dim);

    CorpusManifest m;
    m.days = config.days;
    m.day_span = {config.day_start, config.day_end};
    m.embedding_dim = config.embedding_dim;

    GroundTruthScript script;
    script.seed = seed;
    script.config = config;

    std::vector<PersonId> people;
    for (int i = 0; i < config.persons; ++i) {
        std::string name(kPersonNames[i]);
        PersonId id = normalize_text(name);
        people.push_back(id);
        script.names[id] = name;
        m.roster.push_back({id, name});
    }
    std::map<PersonId, CameraId> worn_by;
    for (int i = 0; i < config.ego_cameras; ++i) {
        CameraId cam = "ego" + std::to_string(i + 1);
        m.cameras.push_back({cam, CameraKind::ego, people[i]});
        worn_by[people[i]] = cam;
    }
    std::vector<std::string> rooms;
    for (int i = 0; i < config.exo_cameras; ++i) {
        CameraId cam = "exo" + std::to_string(i + 1);
        m.cameras.push_back({cam, CameraKind::exo, std::nullopt});
        rooms.emplace_back(kCameraPlaces[i]);
        script.place_cameras[rooms.back()] = cam;
    }
    m.validate();

    std::map<PersonId, std::vector<double>> body_centroid;
    std::map<PersonId, std::vector<double>> face_centroid;
    for (const auto& p : people) {
        body_centroid[p] = random_unit(rng, dim);
        face_centroid[p] = random_unit(rng, dim);
    }

    // Happenings sit on every `spacing`-th slot, a quarter hour clear of both day edges.
    const int first_slot = static_cast<int>(config.day_start / kSlotSeconds);
    const int end_slot = static_cast<int>(config.day_end / kSlotSeconds);
    const int lo = first_slot + kSlotsPerBucket;
    const int hi = end_slot - kSlotsPerBucket;
    const int spacing = config.density > 0.0 ? std::max(1, static_cast<int>(std::lround(1.0 / config.density))) : 0;

    std::set<std::string> used_utterances;
    std::set<std::string> used_screens;
    std::map<Lane, std::vector<LaneRecord>> lanes;
    auto emit = [&](const CameraId& cam, const TimeWindow& w, LanePayload payload) {
        LaneRecord r{cam, w, std::move(payload)};
        lanes[r.lane()].push_back(std::move(r));
    };

    int serial = 0;
    for (int day = 1; day <= config.days; ++day) {
        std::vector<Activity> pool = activities();
        rng.shuffle(pool);
        std::size_t next_activity = 0;
        std::map<int, const Happening*> by_slot;
        std::size_t day_begin = script.happenings.size();

        for (int slot = lo; spacing > 0 && slot < hi; slot += spacing) {
            Happening h;
            h.id = "h" + std::to_string(++serial);
            h.day = day;
            h.slot = slot;
            h.place = rng.pick(rooms);
            h.actor = rng.pick(people);
            if (rng.unit() < 0.5) {
                std::vector<PersonId> others;
                for (const auto& p : people) {
                    if (p != h.actor) others.push_back(p);
                }
                h.co_actors.push_back(rng.pick(others));
            }
            h.activity = pool[next_activity++ % pool.size()];
            h.count = 1 + static_cast<int>(rng.below(4));
            std::vector<std::string> regions(std::begin(kRegions), std::end(kRegions));
            rng.shuffle(regions);
            h.regions.assign(regions.begin(), regions.begin() + h.count);
            do {
                h.utterance = std::string(kOpeners[rng.below(std::size(kOpeners))]) + ", the " +
                              std::string(kModifiers[rng.below(std::size(kModifiers))]) + " " +
                              std::string(kThings[rng.below(std::size(kThings))]) + " " +
                              std::string(kPredicates[rng.below(std::size(kPredicates))]) + ".";
            } while (!used_utterances.insert(h.utterance).second);
            if (rng.unit() < 0.5) {
                std::string screen;
                do {
                    screen = std::string(kScreenLabels[rng.below(std::size(kScreenLabels))]) + " " +
                             std::to_string(100 + rng.below(900));
                } while (!used_screens.insert(screen).second);
                h.screen_text = screen;
            }
            h.visible.push_back(script.place_cameras.at(h.place));
            for (const auto& p : h.participants()) {
                if (auto it = worn_by.find(p); it != worn_by.end()) h.visible.push_back(it->second);
            }
            script.happenings.push_back(std::move(h));
        }
        for (std::size_t i = day_begin; i < script.happenings.size(); ++i) {
            by_slot[script.happenings[i].slot] = &script.happenings[i];
        }

        // Happening records.
        for (std::size_t i = day_begin; i < script.happenings.size(); ++i) {
            const auto& h = script.happenings[i];
            auto w = h.window();
            std::vector<std::string> names;
            for (const auto& p : h.participants()) names.push_back(script.names.at(p));
            const auto& actor_name = script.names.at(h.actor);
            const auto& a = h.activity;
            std::string who = join_names(names);
            std::string are = names.size() > 1 ? " are " : " is ";

            std::vector<PersonId> outsiders;
            for (const auto& p : people) {
                auto parts = h.participants();
                if (std::find(parts.begin(), parts.end(), p) == parts.end()) outsiders.push_back(p);
            }
            const auto& decoy = rng.pick(outsiders);

            for (const auto& cam : h.visible) {
                bool exo = m.is_exo(cam);
                TranscriptPayload t;
                t.text = h.utterance;
                if (exo) {
                    t.candidates = {{h.actor, 0.9}, {decoy, 0.95}};
                } else {
                    t.candidates = {{h.actor, 0.9}};
                    t.speaker = h.actor;
                }
                emit(cam, w, t);

                if (exo) {
                    emit(cam, w, CaptionPayload{who + are + a.gerund + " " + a.plural + " in the " + h.place + ".",
                                                CaptionKind::scene_300s});
                    emit(cam, w, CaptionPayload{"Over the half hour " + who + " spend time " + a.gerund + " " + a.plural +
                                                    " in the " + h.place + ".",
                                                CaptionKind::narrative_1800s});
                    emit(cam, w, CaptionPayload{actor_name + " is " + a.gerund + " " + a.plural + " in the " + h.place + ".",
                                                CaptionKind::action_verb});
                    emit(cam, w, CaptionPayload{actor_name + " says \"" + h.utterance + "\" while " + a.gerund + " " +
                                                    a.plural + " in the " + h.place + ".",
                                                CaptionKind::av_joint});
                    emit(cam, w, CaptionPayload{actor_name + " is probably " + a.gerund + " " + a.plural + " in the " +
                                                    h.place + " because " + std::to_string(h.count) + " " +
                                                    (h.count == 1 ? a.object : a.plural) + " are near the " +
                                                    h.regions.front() + ".",
                                                CaptionKind::reasoning});
                    if (h.screen_text) emit(cam, w, ObjectPayload{*h.screen_text, "ocr", 0.97});
                } else {
                    emit(cam, w, CaptionPayload{"Wearer view: " + who + are + a.gerund + " " + a.plural + " in the " +
                                                    h.place + ".",
                                                CaptionKind::scene_300s});
                    emit(cam, w, CaptionPayload{actor_name + " is " + a.gerund + " " + a.plural + " in the " + h.place + ".",
                                                CaptionKind::action_verb});
                }
                for (const auto& region : h.regions) emit(cam, w, ObjectPayload{a.object, region, 0.9});
                emit(cam, w, ActionPayload{a.stem, h.actor, h.co_actors});
            }
        }

        // Presence: every slot, every person somewhere; each watched room occupied.
        // A density-0 corpus stays empty.
        for (int slot = first_slot; spacing > 0 && slot < end_slot; ++slot) {
            TimeWindow w{day_start(day) + slot * kSlotSeconds, day_start(day) + (slot + 1) * kSlotSeconds};
            std::map<PersonId, std::string> where;
            std::vector<std::string> idle_rooms = rooms;
            auto hit = by_slot.find(slot);
            std::vector<PersonId> idle;
            if (hit != by_slot.end()) {
                for (const auto& p : hit->second->participants()) where[p] = hit->second->place;
                std::erase(idle_rooms, hit->second->place);
            }
            for (const auto& p : people) {
                if (!where.contains(p)) idle.push_back(p);
            }
            rng.shuffle(idle);
            std::vector<std::string> anywhere = idle_rooms;
            for (auto u : kUnwatchedPlaces) anywhere.emplace_back(u);
            for (std::size_t i = 0; i < idle.size(); ++i) {
                where[idle[i]] = i < idle_rooms.size() ? idle_rooms[i] : rng.pick(anywhere);
            }

            for (const auto& cam : m.cameras) {
                std::string room = cam.kind == CameraKind::exo ? rooms[static_cast<std::size_t>(
                                                                     std::stoi(cam.id.substr(3)) - 1)]
                                                               : where.at(*cam.wearer);
                for (const auto& p : people) {
                    if (where.at(p) != room) continue;
                    emit(cam.id, w,
                         IdentityPayload{p, jitter(rng, body_centroid.at(p), 0.05), jitter(rng, face_centroid.at(p), 0.05),
                                         rng.between(0.8, 0.99)});
                }
            }
        }
    }

    SyntheticCorpus corpus;
    for (Lane l : kAllLanes) {
        for (const auto& r : lanes[l]) validate_record(r, m);
    }
    corpus.db = LaneDatabase(m, std::move(lanes));
    std::vector<std::string> places(rooms.begin(), rooms.end());
    for (auto u : kUnwatchedPlaces) places.emplace_back(u);
    std::vector<std::string> objects;
    for (const auto& a : activities()) objects.push_back(a.object);
    corpus.catalogs = Catalogs::from_manifest(m, places, objects);
    corpus.lexicons = Lexicons::defaults();
    corpus.script = std::move(script);
    return corpus;
}

// ---------------------------------------------------------------- questions

IntentMix default_intent_mix() {
    return {{Intent::who, 0.2},  {Intent::where, 0.15}, {Intent::when, 0.15},
            {Intent::what, 0.2}, {Intent::count, 0.15}, {Intent::order_before_after, 0.15}};
}

std::vector<Question> generate_questions(GroundTruthScript& script, std::size_t n, const IntentMix& mix) {
    Rng rng(script.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto& hs = script.happenings;

    // Largest-remainder allocation of n over the mix.
    double total_weight = 0.0;
    for (const auto& [_, w] : mix) total_weight += std::max(0.0, w);
    std::vector<std::pair<Intent, std::size_t>> quota;
    std::vector<std::pair<double, Intent>> remainders;
    std::size_t assigned = 0;
    for (const auto& [intent, w] : mix) {
        double exact = total_weight > 0.0 ? static_cast<double>(n) * std::max(0.0, w) / total_weight : 0.0;
        auto whole = static_cast<std::size_t>(std::floor(exact));
        quota.emplace_back(intent, whole);
        remainders.emplace_back(exact - static_cast<double>(whole), intent);
        assigned += whole;
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i, ++assigned) {
        for (auto& [intent, q] : quota) {
            if (intent == remainders[i].second) ++q;
        }
    }

    // Neighbours within the same day, in time order.
    auto same_day_neighbour = [&](const Happening& h, int delta) -> const Happening* {
        const Happening* best = nullptr;
        for (const auto& o : hs) {
            if (o.day != h.day || o.id == h.id) continue;
            if (delta < 0 && o.slot < h.slot && (!best || o.slot > best->slot)) best = &o;
            if (delta > 0 && o.slot > h.slot && (!best || o.slot < best->slot)) best = &o;
        }
        return best;
    };
    auto day_count = [&](int day) {
        return std::count_if(hs.begin(), hs.end(), [&](const Happening& o) { return o.day == day; });
    };

    struct Draft {
        Intent intent;
        std::string text;
        std::string gold;
        std::vector<std::string> distractors;
        std::string target;
    };
    std::vector<Draft> drafts;
    std::set<std::pair<std::string, std::string>> used;  // (happening, variant)

    for (const auto& [intent, count] : quota) {
        for (std::size_t k = 0; k < count; ++k) {
            // Candidate (reference happening, variant) pairs for this intent.
            std::vector<std::pair<const Happening*, std::string>> options;
            for (const auto& h : hs) {
                switch (intent) {
                    case Intent::who:
                    case Intent::where:
                    case Intent::count: options.emplace_back(&h, "plain"); break;
                    case Intent::when:
                        if (day_count(h.day) >= 4) options.emplace_back(&h, "plain");
                        break;
                    case Intent::what:
                        if (hs.size() >= 4) options.emplace_back(&h, "utterance");
                        if (h.screen_text) options.emplace_back(&h, "screen");
                        break;
                    case Intent::order_before_after:
                        if (day_count(h.day) < 4) break;
                        if (same_day_neighbour(h, -1)) options.emplace_back(&h, "before");
                        if (same_day_neighbour(h, +1)) options.emplace_back(&h, "after");
                        break;
                    case Intent::other: break;
                }
            }
            if (options.empty()) {
                throw InsufficientEvents("no happening supports a " + to_string(intent) + " question");
            }
            std::vector<std::pair<const Happening*, std::string>> fresh;
            for (const auto& o : options) {
                if (!used.contains({o.first->id, to_string(intent) + o.second})) fresh.push_back(o);
            }
            if (fresh.empty() && intent == Intent::order_before_after && options.size() < count) {
                throw InsufficientEvents("only " + std::to_string(options.size()) + " distinct order questions exist");
            }
            const auto& [h, variant] = rng.pick(fresh.empty() ? options : fresh);
            used.insert({h->id, to_string(intent) + variant});

            const auto& name = script.names.at(h->actor);
            const auto& a = h->activity;
            const auto day = std::to_string(h->day);
            Draft d{intent, "", "", {}, h->id};
            auto fill_from = [&](std::vector<std::string> pool) {
                std::erase(pool, d.gold);
                std::sort(pool.begin(), pool.end());
                pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
                rng.shuffle(pool);
                for (std::size_t i = 0; i < pool.size() && d.distractors.size() < 3; ++i) d.distractors.push_back(pool[i]);
            };

            switch (intent) {
                case Intent::who: {
                    d.text = "Who was " + a.gerund + " " + a.plural + " in the " + h->place + " on day " + day + "?";
                    d.gold = name;
                    std::vector<std::string> pool;
                    for (const auto& [pid, pname] : script.names) {
                        auto parts = h->participants();
                        if (std::find(parts.begin(), parts.end(), pid) == parts.end()) pool.push_back(pname);
                    }
                    fill_from(pool);
                    break;
                }
                case Intent::where: {
                    d.text = "Where was " + name + " " + a.gerund + " " + a.plural + " on day " + day + "?";
                    d.gold = h->place;
                    std::vector<std::string> pool;
                    for (const auto& [place, _] : script.place_cameras) pool.push_back(place);
                    for (auto u : kUnwatchedPlaces) pool.emplace_back(u);
                    fill_from(pool);
                    break;
                }
                case Intent::when: {
                    d.text = "When did " + name + " start " + a.gerund + " " + a.plural + " on day " + day + "?";
                    d.gold = clock_string(h->slot * kSlotSeconds);
                    std::vector<std::string> pool;
                    for (const auto& o : hs) {
                        if (o.day == h->day) pool.push_back(clock_string(o.slot * kSlotSeconds));
                    }
                    fill_from(pool);
                    break;
                }
                case Intent::what: {
                    std::vector<std::string> pool;
                    if (variant == "screen") {
                        d.text = "What text was shown on screen while " + name + " was " + a.gerund + " " + a.plural +
                                 " on day " + day + "?";
                        d.gold = *h->screen_text;
                        for (const auto& o : hs) {
                            if (o.screen_text) pool.push_back(*o.screen_text);
                        }
                        for (std::size_t i = 0; pool.size() < 4; ++i) pool.push_back("NOTICE " + std::to_string(10 + i));
                    } else {
                        d.text = "What did " + name + " say while " + a.gerund + " " + a.plural + " on day " + day + "?";
                        d.gold = h->utterance;
                        for (const auto& o : hs) pool.push_back(o.utterance);
                    }
                    fill_from(pool);
                    break;
                }
                case Intent::count: {
                    d.text = "How many " + a.plural + " were in view while " + name + " was " + a.gerund + " them on day " +
                             day + "?";
                    d.gold = std::to_string(h->count);
                    fill_from({"1", "2", "3", "4"});
                    std::sort(d.distractors.begin(), d.distractors.end());
                    break;
                }
                case Intent::order_before_after: {
                    bool before = variant == "before";
                    const Happening* answer = same_day_neighbour(*h, before ? -1 : +1);
                    d.text = "What was happening immediately " + std::string(before ? "before " : "after ") + name +
                             (before ? " started " : " finished ") + a.gerund + " " + a.plural + " on day " + day + "?";
                    d.gold = script.descriptor(*answer);
                    d.target = answer->id;
                    std::vector<std::string> pool;
                    for (const auto& o : hs) {
                        if (o.day == h->day) pool.push_back(script.descriptor(o));
                    }
                    fill_from(pool);
                    break;
                }
                case Intent::other: break;
            }
            drafts.push_back(std::move(d));
        }
    }

    rng.shuffle(drafts);
    std::vector<Question> out;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        auto& d = drafts[i];
        Question q;
        char id[32];
        std::snprintf(id, sizeof id, "q%04zu", i + 1);
        q.id = id;
        q.text = d.text;
        std::vector<std::string> texts = d.distractors;
        std::size_t gold_at;
        if (d.intent == Intent::count) {
            texts.push_back(d.gold);
            std::sort(texts.begin(), texts.end());
            gold_at = static_cast<std::size_t>(std::find(texts.begin(), texts.end(), d.gold) - texts.begin());
        } else {
            gold_at = rng.below(texts.size() + 1);
            texts.insert(texts.begin() + static_cast<std::ptrdiff_t>(gold_at), d.gold);
        }
        if (texts.size() != kChoiceLabels.size()) {
            throw InsufficientEvents("question " + q.id + " has only " + std::to_string(texts.size()) + " distinct choices");
        }
        for (std::size_t c = 0; c < texts.size(); ++c) q.choices.push_back({label_at(c), texts[c]});
        q.answer = label_at(gold_at);
        q.validate();
        script.targets[q.id] = {d.target, d.intent};
        out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------- oracle

std::string to_string(Injection i) {
    switch (i) {
        case Injection::none: return "none";
        case Injection::echo: return "echo";
        case Injection::assert_on_empty: return "assert_on_empty";
        case Injection::ungrounded_count: return "ungrounded_count";
    }
    return "?";
}

OracleChannel::OracleChannel(const GroundTruthScript& script, std::span<const Question> questions,
                             OracleOptions options)
    : script_(script), options_(options) {
    for (const auto& q : questions) questions_.emplace(q.id, q);
}

bool OracleChannel::noisy(const std::string& question_id, const std::string& window) const {
    if (options_.noise <= 0.0) return false;
    return unit_hash(std::to_string(options_.noise_seed) + "|" + question_id + "|" + window) < options_.noise;
}

std::string OracleChannel::wrong_label(const Question& q, const std::string& salt) const {
    std::vector<std::string> wrong;
    for (const auto& c : q.choices) {
        if (c.label != q.answer.value_or("")) wrong.push_back(c.label);
    }
    return wrong[fnv1a64(std::to_string(options_.noise_seed) + "|" + q.id + "|" + salt) % wrong.size()];
}

std::string OracleChannel::complete(const ModelRequest& req) {
    auto qit = questions_.find(req.question_id);
    const Question* q = qit == questions_.end() ? nullptr : &qit->second;
    const Happening* target = script_.target_of(req.question_id);
    switch (req.role) {
        case Role::search_rerank: return reply_rerank(req, target).dump();
        case Role::search_final: return reply_final(req, target, q).dump();
        case Role::verify: return reply_verify(req).dump();
        case Role::judge: return reply_judge(req, target, q).dump();
        case Role::tmkg_answer: return reply_tmkg(req, target, q).dump();
        case Role::prior: return reply_prior(req, target, q).dump();
        case Role::summarise: {
            std::string text;
            for (const auto& p : req.user_parts) text += p.content + " ";
            return json{{"summary", excerpt(text, 400)}}.dump();
        }
        case Role::parse: break;
    }
    throw HttpError("oracle has no rule for role " + to_string(req.role));
}

json OracleChannel::reply_rerank(const ModelRequest& req, const Happening* target) const {
    auto ids = candidates_of(req);
    if (target != nullptr) {
        auto w = target->window();
        std::stable_partition(ids.begin(), ids.end(), [&](const std::string& id) {
            auto key = parse_key(id);
            return key && contains(key_window(*key), w);
        });
    }
    return {{"ranking", ids}};
}

json OracleChannel::reply_final(const ModelRequest& req, const Happening* target, const Question* q) const {
    auto ids = candidates_of(req);
    json reply{{"primary", ids.empty() ? "" : ids.front()}, {"supporting", json::array()}, {"tentative_choice", nullptr}};
    if (target == nullptr) return reply;
    for (const auto& id : ids) {
        auto key = parse_key(id);
        if (!key || !contains(key_window(*key), target->window())) continue;
        reply["primary"] = id;
        for (const auto& cam : target->visible) reply["supporting"].push_back({{"camera", cam}, {"window", id}});
        if (q != nullptr && q->answer) reply["tentative_choice"] = *q->answer;
        break;
    }
    return reply;
}

json OracleChannel::reply_verify(const ModelRequest& req) const {
    auto clip = clip_of(req);
    auto spans = spans_of(req);
    auto qit = questions_.find(req.question_id);
    const Question* q = qit == questions_.end() ? nullptr : &qit->second;
    const Happening* target = script_.target_of(req.question_id);
    auto window = clip ? key_string(*clip) : std::string("?");
    bool empty = std::all_of(spans.begin(), spans.end(), [](const EvidenceSpan& s) { return s.kind == ClaimKind::context; });

    json abstain{{"verdict", "abstain"}, {"confidence", 0.5}, {"claims", json::array()}};
    auto claim = [](const EvidenceSpan& s) {
        return json{{"kind", to_string(s.kind)}, {"text", s.text}, {"evidence_span_ids", {s.id}}};
    };

    // Confabulation injections, marked so suites can tell them apart.
    switch (options_.injection) {
        case Injection::none: break;
        case Injection::echo:
            if (q != nullptr && !spans.empty()) {
                json c{{"kind", "audio_quote"}, {"text", q->text + " " + q->choices.front().text},
                       {"evidence_span_ids", {spans.front().id}}};
                return {{"verdict", "supports"}, {"label", "A"}, {"confidence", 0.8}, {"claims", {c}}, {"injected", true}};
            }
            break;
        case Injection::assert_on_empty:
            if (empty && !spans.empty()) {
                json c{{"kind", "visual"}, {"text", "the activity is clearly visible"},
                       {"evidence_span_ids", {spans.front().id}}};
                return {{"verdict", "supports"}, {"label", "A"}, {"confidence", 0.8}, {"claims", {c}}, {"injected", true}};
            }
            break;
        case Injection::ungrounded_count:
            if (!spans.empty()) {
                std::vector<std::string> ids;
                int n = 0;
                for (const auto& s : spans) {
                    if (s.kind == ClaimKind::visual && !region_of(s.text).empty()) {
                        ids.push_back(s.id);
                        ++n;
                    }
                }
                if (ids.empty()) ids.push_back(spans.front().id);
                json c{{"kind", "visual"}, {"text", std::to_string(std::max(n, 2)) + " items in view"},
                       {"evidence_span_ids", ids}, {"count_value", std::max(n, 2)}, {"localisations", json::array()}};
                return {{"verdict", "supports"}, {"label", "A"}, {"confidence", 0.8}, {"claims", {c}}, {"injected", true}};
            }
            break;
    }

    if (q == nullptr || target == nullptr) return abstain;
    bool has_target = std::any_of(spans.begin(), spans.end(),
                                  [&](const EvidenceSpan& s) { return script_.mentions(*target, s.text); });
    if (!has_target) {
        if (empty || !noisy(q->id, window)) return abstain;
        // Noise: a grounded but misleading visual claim about the wrong happening.
        auto visual = std::find_if(spans.begin(), spans.end(), [](const EvidenceSpan& s) { return s.kind == ClaimKind::visual; });
        const auto& cited = visual != spans.end() ? *visual : spans.front();
        json c{{"kind", "visual"}, {"text", cited.text}, {"evidence_span_ids", {cited.id}}};
        return {{"verdict", "supports"}, {"label", wrong_label(*q, window)}, {"confidence", 0.4}, {"claims", {c}}};
    }

    json claims = json::array();
    json counted_ids = json::array();
    json locs = json::array();
    for (const auto& s : spans) {
        if (s.kind == ClaimKind::audio_quote || s.kind == ClaimKind::ocr) {
            claims.push_back(claim(s));
        } else if (s.kind == ClaimKind::visual) {
            auto region = region_of(s.text);
            if (!region.empty() && s.text.starts_with(target->activity.object + " (")) {
                counted_ids.push_back(s.id);
                locs.push_back({{"camera", clip->camera}, {"timestamp", clip->window().start}, {"region", region}});
            } else if (script_.mentions(*target, s.text)) {
                claims.push_back(claim(s));
            }
        }
    }
    auto intent = script_.targets.at(q->id).intent;
    if (intent == Intent::count && !counted_ids.empty()) {
        auto n = static_cast<int>(counted_ids.size());
        claims.push_back({{"kind", "visual"},
                          {"text", std::to_string(n) + " " + (n == 1 ? target->activity.object : target->activity.plural) +
                                       " in view"},
                          {"evidence_span_ids", counted_ids},
                          {"localisations", locs},
                          {"count_value", n}});
    }
    return {{"verdict", "supports"}, {"label", *q->answer}, {"confidence", 0.9}, {"claims", claims}};
}

json OracleChannel::reply_judge(const ModelRequest& req, const Happening* target, const Question* q) const {
    std::vector<std::string> items;
    for (const auto& p : req.user_parts) {
        if (p.kind == UserPart::Kind::evidence_ref) items.push_back(p.content);
    }
    json reply{{"confidence", 0.3}, {"supporting_views", json::array()}, {"rationale", "weak: no target evidence"}};
    if (q != nullptr && target != nullptr && !items.empty() && script_.mentions(*target, items.front())) {
        reply["choice"] = *q->answer;
        reply["confidence"] = 0.9;
        reply["rationale"] = "the highest-priority evidence shows the event";
        for (const auto& cam : target->visible) reply["supporting_views"].push_back(cam);
        return reply;
    }
    auto tentative = tentative_of(req);
    if (q == nullptr) {
        reply["choice"] = tentative.value_or("A");
        return reply;
    }
    std::vector<WeightedText> top;
    if (!items.empty()) top.push_back({items.front(), 1.0});
    reply["choice"] = overlap_choice(*q, top, tentative).label;
    return reply;
}

json OracleChannel::reply_tmkg(const ModelRequest& req, const Happening* target, const Question* q) const {
    // Cells and the bundles that follow each cell header.
    std::vector<std::pair<std::string, std::vector<std::string>>> cells;
    for (const auto& p : req.user_parts) {
        if (p.kind == UserPart::Kind::text && p.content.starts_with("cell ")) {
            auto rest = p.content.substr(5);
            cells.emplace_back(rest.substr(0, rest.find(' ')), std::vector<std::string>{});
        } else if (p.kind == UserPart::Kind::evidence_ref && !cells.empty()) {
            cells.back().second.push_back(p.content);
        }
    }
    json reply{{"confidence", 0.3}, {"supporting_views", json::array()}, {"rationale", "weak: no target evidence"}};
    if (q == nullptr) {
        reply["choice"] = "A";
        return reply;
    }
    std::string target_cell;
    if (target != nullptr) {
        for (const auto& [cell, bundles] : cells) {
            for (const auto& b : bundles) {
                if (script_.mentions(*target, b)) target_cell = cell;
            }
        }
    }
    if (target_cell.empty()) {
        std::vector<WeightedText> texts;
        for (const auto& [_, bundles] : cells) {
            for (const auto& b : bundles) texts.push_back({b, 1.0});
        }
        reply["choice"] = overlap_choice(*q, texts).label;
        return reply;
    }
    if (cells.size() > 1) {
        for (const auto& [cell, _] : cells) {
            if (cell != target_cell && noisy(q->id, cell)) {
                reply["choice"] = wrong_label(*q, cell);
                reply["rationale"] = "distracted by a neighbouring cell";
                return reply;
            }
        }
    }
    reply["choice"] = *q->answer;
    reply["confidence"] = 0.9;
    reply["rationale"] = "the selected cell shows the event";
    for (const auto& cam : target->visible) reply["supporting_views"].push_back(cam);
    return reply;
}

json OracleChannel::reply_prior(const ModelRequest&, const Happening*, const Question*) const {
    return {{"reasoning", "Household routines give no strong preference among the choices."}};
}

// ---------------------------------------------------------------- evaluation

json EvalReport::to_json() const {
    return {{"accuracy", accuracy},   {"total", total},           {"correct", correct},
            {"per_intent", per_intent}, {"mean_ledger", mean_ledger}, {"failure_tags", failure_tags}};
}

EvalReport evaluate(std::span<const AnswerRecord> answers, std::span<const Question> questions,
                    const GroundTruthScript* script) {
    std::map<std::string, const Question*> by_id;
    for (const auto& q : questions) by_id[q.id] = &q;
    std::set<std::string> answered;
    for (const auto& a : answers) {
        if (!by_id.contains(a.question_id)) throw IdMismatch("answer for unknown question " + a.question_id);
        if (!answered.insert(a.question_id).second) throw IdMismatch("duplicate answer for " + a.question_id);
    }
    for (const auto& q : questions) {
        if (!answered.contains(q.id)) throw IdMismatch("no answer for question " + q.id);
    }

    EvalReport r;
    std::map<std::string, std::pair<int, int>> intent_tally;
    std::map<std::string, std::pair<double, int>> ledger_tally;
    for (const auto& a : answers) {
        const auto& q = *by_id.at(a.question_id);
        bool ok = q.answer && a.choice == *q.answer;
        ++r.total;
        r.correct += ok ? 1 : 0;
        std::string intent = "all";
        if (script != nullptr) {
            auto it = script->targets.find(q.id);
            if (it != script->targets.end()) intent = to_string(it->second.intent);
        }
        auto& [hit, seen] = intent_tally[intent];
        hit += ok ? 1 : 0;
        ++seen;
        auto& [sum, count] = ledger_tally[a.pipeline.empty() ? "unknown" : a.pipeline];
        sum += a.ledger_total;
        ++count;

        if (ok) continue;
        if (a.diagnostics.fallback_used) ++r.failure_tags["fallback-used"];
        if (a.diagnostics.verify_calls > 0 && a.diagnostics.supporting_reports == 0) ++r.failure_tags["abstain-flood"];
        if (script != nullptr) {
            if (const auto* h = script->target_of(q.id)) {
                bool covered = false;
                for (const auto& wkey : a.diagnostics.windows) {
                    TimeWindow w{};
                    if (auto key = parse_key(wkey)) {
                        w = key_window(*key);
                    } else if (wkey.starts_with("slot:")) {
                        auto rest = wkey.substr(5);
                        auto colon = rest.find(':');
                        int d = std::stoi(rest.substr(0, colon));
                        int s = std::stoi(rest.substr(colon + 1));
                        w = {day_start(d) + s * kSlotSeconds, day_start(d) + (s + 1) * kSlotSeconds};
                    }
                    covered = covered || overlaps(w, h->window());
                }
                if (!covered) ++r.failure_tags["wrong-cell"];
            }
        }
    }
    r.accuracy = r.total > 0 ? static_cast<double>(r.correct) / r.total : 0.0;
    for (const auto& [intent, t] : intent_tally) r.per_intent[intent] = static_cast<double>(t.first) / t.second;
    for (const auto& [p, t] : ledger_tally) r.mean_ledger[p] = t.first / t.second;
    return r;
}

}  // namespace lvqa
