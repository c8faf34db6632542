#include "lvqa/temporal_kg.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "lvqa/errors.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

using json = nlohmann::json;

constexpr std::pair<EdgeKind, std::string_view> kEdgeKinds[] = {
    {EdgeKind::EVIDENCE, "EVIDENCE"},
    {EdgeKind::PARTICIPATES_IN, "PARTICIPATES_IN"},
    {EdgeKind::LOCATED_AT, "LOCATED_AT"},
    {EdgeKind::INVOLVES, "INVOLVES"},
    {EdgeKind::PRECEDES, "PRECEDES"}};

constexpr std::string_view kPersonPrefix = "person:";
constexpr std::string_view kPlacePrefix = "place:";
constexpr std::string_view kObjectPrefix = "object:";
constexpr std::string_view kEventPrefix = "ev:";

/// Gazetteer entries found in `text`, counted per occurrence.
void count_places(std::string_view text, std::span<const std::vector<std::string>> places,
                  std::vector<int>& counts) {
    auto tokens = tokenize(text);
    for (std::size_t p = 0; p < places.size(); ++p) {
        const auto& needle = places[p];
        if (needle.empty() || needle.size() > tokens.size()) continue;
        for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
            if (std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                ++counts[p];
            }
        }
    }
}

std::vector<std::string> top_tags(const Observation& o, std::size_t m) {
    std::map<std::string, int> freq;
    auto add = [&](std::string_view text) {
        for (auto& t : content_tokens(text)) ++freq[t];
    };
    for (const auto& t : o.transcript_texts) add(t);
    for (const auto& t : o.caption_texts) add(t);
    for (const auto& t : o.object_labels) add(t);
    for (const auto& t : o.ocr_texts) add(t);
    for (const auto& a : o.action_tuples) add(a.verb);
    std::vector<std::pair<std::string, int>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > m) ranked.resize(m);
    std::vector<std::string> tags;
    for (auto& [t, _] : ranked) tags.push_back(t);
    std::sort(tags.begin(), tags.end());
    return tags;
}

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

bool event_before(const GlobalEvent& a, const GlobalEvent& b) {
    return std::tie(a.span.start, a.id) < std::tie(b.span.start, b.id);
}

json window_json(const TimeWindow& w) { return json::array({w.start, w.end}); }
TimeWindow window_from(const json& j) { return {j.at(0).get<Seconds>(), j.at(1).get<Seconds>()}; }

json observation_json(const Observation& o) {
    json actions = json::array();
    for (const auto& a : o.action_tuples) {
        actions.push_back({{"span", window_json(a.span)}, {"verb", a.verb}, {"actor", a.actor},
                           {"co_actors", a.co_actors}});
    }
    return {{"id", o.id},
            {"key", key_string(o.key)},
            {"transcript_texts", o.transcript_texts},
            {"caption_texts", o.caption_texts},
            {"action_tuples", actions},
            {"object_labels", o.object_labels},
            {"ocr_texts", o.ocr_texts},
            {"tags", o.tags},
            {"persons", o.persons},
            {"place", o.place ? json(*o.place) : json(nullptr)},
            {"summary", o.summary}};
}

Observation observation_from(const json& j) {
    Observation o;
    o.id = j.at("id").get<std::string>();
    auto key = parse_key(j.at("key").get<std::string>());
    if (!key || !std::holds_alternative<SubWindowKey>(*key)) throw CorruptSegment("bad observation key in " + o.id);
    o.key = std::get<SubWindowKey>(*key);
    o.transcript_texts = j.at("transcript_texts").get<std::vector<std::string>>();
    o.caption_texts = j.at("caption_texts").get<std::vector<std::string>>();
    for (const auto& a : j.at("action_tuples")) {
        o.action_tuples.push_back({window_from(a.at("span")), a.at("verb").get<std::string>(),
                                   a.at("actor").get<std::string>(), a.at("co_actors").get<std::set<PersonId>>()});
    }
    o.object_labels = j.at("object_labels").get<std::vector<std::string>>();
    o.ocr_texts = j.at("ocr_texts").get<std::vector<std::string>>();
    o.tags = j.at("tags").get<std::vector<std::string>>();
    o.persons = j.at("persons").get<std::set<PersonId>>();
    if (!j.at("place").is_null()) o.place = j.at("place").get<std::string>();
    o.summary = j.at("summary").get<std::string>();
    return o;
}

json event_json(const GlobalEvent& e) {
    return {{"id", e.id},
            {"members", e.members},
            {"span", window_json(e.span)},
            {"persons", e.persons},
            {"place", e.place ? json(*e.place) : json(nullptr)},
            {"verbs", e.verbs},
            {"tags", e.tags}};
}

GlobalEvent event_from(const json& j) {
    GlobalEvent e;
    e.id = j.at("id").get<std::string>();
    e.members = j.at("members").get<std::vector<std::string>>();
    e.span = window_from(j.at("span"));
    e.persons = j.at("persons").get<std::set<PersonId>>();
    if (!j.at("place").is_null()) e.place = j.at("place").get<std::string>();
    e.verbs = j.at("verbs").get<std::set<std::string>>();
    e.tags = j.at("tags").get<std::set<std::string>>();
    return e;
}

}  // namespace

std::set<std::string> Observation::verbs() const {
    std::set<std::string> out;
    for (const auto& a : action_tuples) out.insert(a.verb);
    return out;
}

std::string to_string(EdgeKind k) {
    for (auto [v, name] : kEdgeKinds) {
        if (v == k) return std::string(name);
    }
    return "?";
}

EdgeKind edge_kind_from_string(std::string_view s) {
    for (auto [v, name] : kEdgeKinds) {
        if (name == s) return v;
    }
    throw ValidationError("unknown edge kind '" + std::string(s) + "'");
}

std::string person_node(const PersonId& p) { return std::string(kPersonPrefix) + p; }
std::string place_node(const std::string& place) { return std::string(kPlacePrefix) + place; }
std::string object_node(const std::string& label) { return std::string(kObjectPrefix) + label; }

// ---------------------------------------------------------------- observations

std::vector<Observation> build_observations(const LaneDatabase& db, std::span<const std::string> gazetteer,
                                            ObservationConfig config) {
    std::vector<std::vector<std::string>> places;
    for (const auto& g : gazetteer) places.push_back(tokenize(g));

    std::vector<Observation> out;
    for (const auto& [doc_key, records] : partition(db.all(), db.manifest(), Granularity::subwindow)) {
        bool substantive = std::any_of(records.begin(), records.end(),
                                       [](const LaneRecord& r) { return r.lane() != Lane::identity; });
        if (!substantive) continue;

        Observation o;
        o.key = std::get<SubWindowKey>(doc_key);
        o.id = key_string(o.key);
        std::vector<int> place_counts(places.size(), 0);
        for (const auto& r : records) {
            switch (r.lane()) {
                case Lane::identity: o.persons.insert(r.as<IdentityPayload>().person); break;
                case Lane::transcript: o.transcript_texts.push_back(r.as<TranscriptPayload>().text); break;
                case Lane::caption:
                    o.caption_texts.push_back(r.as<CaptionPayload>().text);
                    count_places(r.as<CaptionPayload>().text, places, place_counts);
                    break;
                case Lane::object: {
                    const auto& obj = r.as<ObjectPayload>();
                    if (obj.is_ocr()) {
                        o.ocr_texts.push_back(obj.label);
                    } else {
                        o.object_labels.push_back(obj.label);
                        count_places(obj.label, places, place_counts);
                    }
                    break;
                }
                case Lane::action: {
                    const auto& a = r.as<ActionPayload>();
                    o.action_tuples.push_back({r.window, a.verb, a.actor, {a.co_actors.begin(), a.co_actors.end()}});
                    break;
                }
            }
        }
        auto best = std::max_element(place_counts.begin(), place_counts.end());
        if (best != place_counts.end() && *best > 0) {
            o.place = gazetteer[static_cast<std::size_t>(best - place_counts.begin())];
        }
        o.tags = top_tags(o, config.tag_count);
        o.summary = extractive_summary(records, config.summary_budget);
        out.push_back(std::move(o));
    }
    return out;
}

// ---------------------------------------------------------------- aggregation

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

bool should_merge(const Observation& a, const Observation& b, MergeConfig config) {
    if (a.key.day != b.key.day || a.key.slot != b.key.slot) return false;
    if (a.place != b.place) return false;
    if (jaccard(a.persons, b.persons) < config.person_jaccard) return false;
    auto va = a.verbs();
    auto vb = b.verbs();
    bool shared_verb = std::any_of(va.begin(), va.end(), [&](const std::string& v) { return vb.contains(v); });
    return shared_verb || jaccard(as_set(a.tags), as_set(b.tags)) >= config.tag_jaccard;
}

Aggregation aggregate_global_events(std::span<const Observation> observations, MergeConfig config) {
    // Sort indices by id so the result does not depend on input order.
    std::vector<std::size_t> order(observations.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return observations[x].id < observations[y].id; });

    // Only observations of the same slot can merge.
    std::map<std::pair<int, int>, std::vector<std::size_t>> by_slot;
    for (auto i : order) by_slot[{observations[i].key.day, observations[i].key.slot}].push_back(i);

    UnionFind uf(observations.size());
    for (const auto& [_, members] : by_slot) {
        for (std::size_t x = 0; x < members.size(); ++x) {
            for (std::size_t y = x + 1; y < members.size(); ++y) {
                if (should_merge(observations[members[x]], observations[members[y]], config)) {
                    uf.unite(members[x], members[y]);
                }
            }
        }
    }

    std::map<std::size_t, std::vector<std::size_t>> components;
    for (auto i : order) components[uf.find(i)].push_back(i);

    Aggregation agg;
    for (const auto& [_, members] : components) {
        GlobalEvent e;
        std::map<std::string, int> place_votes;
        e.span = observations[members.front()].key.window();
        for (auto i : members) {
            const auto& o = observations[i];
            e.members.push_back(o.id);
            auto w = o.key.window();
            e.span.start = std::min(e.span.start, w.start);
            e.span.end = std::max(e.span.end, w.end);
            e.persons.insert(o.persons.begin(), o.persons.end());
            auto verbs = o.verbs();
            e.verbs.insert(verbs.begin(), verbs.end());
            e.tags.insert(o.tags.begin(), o.tags.end());
            if (o.place) ++place_votes[*o.place];
        }
        std::sort(e.members.begin(), e.members.end());
        e.id = std::string(kEventPrefix) + e.members.front();
        int best = 0;
        for (const auto& [place, votes] : place_votes) {
            if (votes > best) {
                best = votes;
                e.place = place;
            }
        }
        agg.events.push_back(std::move(e));
    }
    std::sort(agg.events.begin(), agg.events.end(), event_before);
    for (const auto& e : agg.events) {
        for (const auto& m : e.members) agg.evidence.push_back({EdgeKind::EVIDENCE, m, e.id});
    }
    return agg;
}

// ---------------------------------------------------------------- edges

std::vector<TypedEdge> precedes_chain(std::span<const GlobalEvent> events) {
    std::vector<const GlobalEvent*> sorted;
    for (const auto& e : events) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const GlobalEvent* a, const GlobalEvent* b) { return event_before(*a, *b); });
    std::vector<TypedEdge> out;
    for (std::size_t i = 1; i < sorted.size(); ++i) out.push_back({EdgeKind::PRECEDES, sorted[i - 1]->id, sorted[i]->id});
    return out;
}

std::vector<TypedEdge> link_edges(std::span<const GlobalEvent> events, std::span<const Observation> observations,
                                  LinkConfig config) {
    std::map<std::string, const Observation*> by_id;
    for (const auto& o : observations) by_id[o.id] = &o;

    std::vector<TypedEdge> out;
    for (const auto& e : events) {
        for (const auto& p : e.persons) out.push_back({EdgeKind::PARTICIPATES_IN, person_node(p), e.id});
        if (e.place) out.push_back({EdgeKind::LOCATED_AT, e.id, place_node(*e.place)});
        std::map<std::string, int> mentions;
        for (const auto& m : e.members) {
            auto it = by_id.find(m);
            if (it == by_id.end()) continue;
            for (const auto& label : it->second->object_labels) ++mentions[label];
        }
        for (const auto& [label, n] : mentions) {
            if (n >= config.object_floor) out.push_back({EdgeKind::INVOLVES, e.id, object_node(label)});
        }
    }
    auto chain = precedes_chain(events);
    out.insert(out.end(), chain.begin(), chain.end());
    return out;
}

void validate_edges(std::span<const TypedEdge> edges, std::span<const Observation> observations,
                    std::span<const GlobalEvent> events) {
    std::set<std::string> obs_ids;
    for (const auto& o : observations) obs_ids.insert(o.id);
    std::map<std::string, const GlobalEvent*> ev;
    for (const auto& e : events) ev[e.id] = &e;

    auto fail = [](const TypedEdge& e, const std::string& why) {
        throw ValidationError(to_string(e.kind) + " " + e.from + " -> " + e.to + ": " + why);
    };
    for (const auto& e : edges) {
        switch (e.kind) {
            case EdgeKind::EVIDENCE:
                if (!obs_ids.contains(e.from)) fail(e, "source is not an observation");
                if (!ev.contains(e.to)) fail(e, "target is not an event");
                break;
            case EdgeKind::PARTICIPATES_IN:
                if (!e.from.starts_with(kPersonPrefix)) fail(e, "source is not a person");
                if (!ev.contains(e.to)) fail(e, "target is not an event");
                break;
            case EdgeKind::LOCATED_AT:
                if (!ev.contains(e.from)) fail(e, "source is not an event");
                if (!e.to.starts_with(kPlacePrefix)) fail(e, "target is not a place");
                break;
            case EdgeKind::INVOLVES:
                if (!ev.contains(e.from)) fail(e, "source is not an event");
                if (!e.to.starts_with(kObjectPrefix)) fail(e, "target is not an object");
                break;
            case EdgeKind::PRECEDES: {
                auto a = ev.find(e.from);
                auto b = ev.find(e.to);
                if (a == ev.end() || b == ev.end()) fail(e, "endpoint is not an event");
                if (!event_before(*a->second, *b->second)) fail(e, "edge runs backwards in time");
                break;
            }
        }
    }
}

// ---------------------------------------------------------------- graph

TemporalGraph::TemporalGraph(std::vector<Observation> observations, std::vector<GlobalEvent> events,
                             std::vector<TypedEdge> edges)
    : observations_(std::move(observations)), events_(std::move(events)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < observations_.size(); ++i) obs_index_[observations_[i].id] = i;
    for (std::size_t i = 0; i < events_.size(); ++i) {
        event_index_[events_[i].id] = i;
        for (const auto& m : events_[i].members) obs_to_event_[m] = events_[i].id;
    }
    for (const auto& e : edges_) {
        edge_set_.insert(e);
        if (e.kind == EdgeKind::PRECEDES) {
            next_[e.from] = e.to;
            prev_[e.to] = e.from;
        }
    }
}

TemporalGraph TemporalGraph::build(const LaneDatabase& db, std::span<const std::string> gazetteer,
                                   GraphConfig config) {
    auto observations = build_observations(db, gazetteer, config.observations);
    auto agg = aggregate_global_events(observations, config.merge);
    auto edges = std::move(agg.evidence);
    auto linked = link_edges(agg.events, observations, config.link);
    edges.insert(edges.end(), linked.begin(), linked.end());
    return TemporalGraph(std::move(observations), std::move(agg.events), std::move(edges));
}

SegmentKey segment_key_of(const TimeWindow& w) {
    return {day_of(w.start), static_cast<int>(second_of_day(w.start) / kHourSeconds)};
}

std::vector<GraphSegment> TemporalGraph::segments() const {
    std::map<SegmentKey, GraphSegment> out;
    auto seg = [&](SegmentKey k) -> GraphSegment& {
        auto& s = out[k];
        s.key = k;
        return s;
    };
    std::map<std::string, SegmentKey> event_seg;
    for (const auto& o : observations_) seg(segment_key_of(o.key.window())).observations.push_back(o);
    for (const auto& e : events_) {
        auto k = segment_key_of(e.span);
        event_seg[e.id] = k;
        seg(k).events.push_back(e);
    }
    for (const auto& e : edges_) {
        switch (e.kind) {
            case EdgeKind::EVIDENCE:
            case EdgeKind::PARTICIPATES_IN: seg(event_seg.at(e.to)).edges.push_back(e); break;
            case EdgeKind::LOCATED_AT:
            case EdgeKind::INVOLVES: seg(event_seg.at(e.from)).edges.push_back(e); break;
            case EdgeKind::PRECEDES:
                // Cross-segment links are re-stitched on load.
                if (event_seg.at(e.from) == event_seg.at(e.to)) seg(event_seg.at(e.from)).edges.push_back(e);
                break;
        }
    }
    std::vector<GraphSegment> list;
    for (auto& [_, s] : out) list.push_back(std::move(s));
    return list;
}

TemporalGraph TemporalGraph::from_segments(std::span<const GraphSegment> segments) {
    std::vector<Observation> observations;
    std::vector<GlobalEvent> events;
    std::vector<TypedEdge> edges;
    for (const auto& s : segments) {
        observations.insert(observations.end(), s.observations.begin(), s.observations.end());
        events.insert(events.end(), s.events.begin(), s.events.end());
        for (const auto& e : s.edges) {
            if (e.kind != EdgeKind::PRECEDES) edges.push_back(e);
        }
    }
    std::sort(observations.begin(), observations.end(),
              [](const Observation& a, const Observation& b) { return a.id < b.id; });
    std::sort(events.begin(), events.end(), event_before);
    auto chain = precedes_chain(events);
    edges.insert(edges.end(), chain.begin(), chain.end());
    return TemporalGraph(std::move(observations), std::move(events), std::move(edges));
}

const Observation* TemporalGraph::observation(const std::string& id) const {
    auto it = obs_index_.find(id);
    return it == obs_index_.end() ? nullptr : &observations_[it->second];
}

const GlobalEvent* TemporalGraph::event(const std::string& id) const {
    auto it = event_index_.find(id);
    return it == event_index_.end() ? nullptr : &events_[it->second];
}

const GlobalEvent* TemporalGraph::event_of(const std::string& observation_id) const {
    auto it = obs_to_event_.find(observation_id);
    return it == obs_to_event_.end() ? nullptr : event(it->second);
}

bool TemporalGraph::has_edge(EdgeKind kind, const std::string& from, const std::string& to) const {
    return edge_set_.contains({kind, from, to});
}

std::optional<std::string> TemporalGraph::next_event(const std::string& event_id) const {
    auto it = next_.find(event_id);
    if (it == next_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> TemporalGraph::previous_event(const std::string& event_id) const {
    auto it = prev_.find(event_id);
    if (it == prev_.end()) return std::nullopt;
    return it->second;
}

std::vector<CellDocument> TemporalGraph::observation_documents() const {
    std::vector<CellDocument> docs;
    for (const auto& o : observations_) {
        CellDocument d;
        d.key = o.key;
        d.text = o.summary;
        d.source_counts = {{"transcript", static_cast<int>(o.transcript_texts.size())},
                           {"caption", static_cast<int>(o.caption_texts.size())},
                           {"object", static_cast<int>(o.object_labels.size() + o.ocr_texts.size())},
                           {"action", static_cast<int>(o.action_tuples.size())},
                           {"identity", static_cast<int>(o.persons.size())}};
        docs.push_back(std::move(d));
    }
    return docs;
}

// ---------------------------------------------------------------- persistence

std::filesystem::path segment_path(const std::filesystem::path& dir, SegmentKey key) {
    return dir / (std::to_string(key.day) + "_" + std::to_string(key.hour) + ".segment.json");
}

json to_json(const GraphSegment& s) {
    json obs = json::array();
    for (const auto& o : s.observations) obs.push_back(observation_json(o));
    json evs = json::array();
    for (const auto& e : s.events) evs.push_back(event_json(e));
    json edges = json::array();
    for (const auto& e : s.edges) edges.push_back({to_string(e.kind), e.from, e.to});
    return {{"day", s.key.day}, {"hour", s.key.hour}, {"observations", obs}, {"events", evs}, {"edges", edges}};
}

GraphSegment segment_from_json(const json& j) {
    GraphSegment s;
    try {
        s.key = {j.at("day").get<int>(), j.at("hour").get<int>()};
        for (const auto& o : j.at("observations")) s.observations.push_back(observation_from(o));
        for (const auto& e : j.at("events")) s.events.push_back(event_from(e));
        for (const auto& e : j.at("edges")) {
            s.edges.push_back({edge_kind_from_string(e.at(0).get<std::string>()), e.at(1).get<std::string>(),
                               e.at(2).get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw CorruptSegment(std::string("malformed segment: ") + e.what());
    } catch (const ValidationError& e) {
        throw CorruptSegment(std::string("malformed segment: ") + e.what());
    }
    return s;
}

std::filesystem::path persist_segment(const GraphSegment& segment, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto path = segment_path(dir, segment.key);
    auto body = to_json(segment).dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << body << '\n' << json{{"checksum", sha256_hex(body)}}.dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
    return path;
}

GraphSegment load_segment(const std::filesystem::path& dir, SegmentKey key) {
    auto path = segment_path(dir, key);
    if (!std::filesystem::exists(path)) {
        throw NotFound("no segment " + std::to_string(key.day) + "_" + std::to_string(key.hour));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string body;
    std::string trailer;
    std::getline(in, body);
    std::getline(in, trailer);
    auto check = json::parse(trailer, nullptr, false);
    if (check.is_discarded() || !check.is_object() || !check.contains("checksum") ||
        !check["checksum"].is_string()) {
        throw CorruptSegment(path.string() + ": missing checksum record");
    }
    if (check["checksum"].get<std::string>() != sha256_hex(body)) {
        throw CorruptSegment(path.string() + ": checksum mismatch");
    }
    auto parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded()) throw CorruptSegment(path.string() + ": body is not JSON");
    auto s = segment_from_json(parsed);
    if (s.key != key) throw CorruptSegment(path.string() + ": key does not match file name");
    return s;
}

std::vector<GraphSegment> load_all_segments(const std::filesystem::path& dir) {
    std::vector<SegmentKey> keys;
    if (!std::filesystem::is_directory(dir)) throw NotFound("no segment directory " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        auto name = entry.path().filename().string();
        constexpr std::string_view suffix = ".segment.json";
        if (!name.ends_with(suffix)) continue;
        auto stem = name.substr(0, name.size() - suffix.size());
        auto us = stem.find('_');
        if (us == std::string::npos) continue;
        try {
            keys.push_back({std::stoi(stem.substr(0, us)), std::stoi(stem.substr(us + 1))});
        } catch (const std::exception&) {
            continue;
        }
    }
    std::sort(keys.begin(), keys.end());
    std::vector<GraphSegment> out;
    for (auto k : keys) out.push_back(load_segment(dir, k));
    return out;
}

// ---------------------------------------------------------------- queries

RankedList rerank_with_predicates(const RankedList& base, const ParsedQuery& constraints,
                                  const TemporalGraph& graph, PredicateBonuses bonuses) {
    if (!constraints.has_relational_constraints()) return base;
    RankedList out = base;
    for (auto& entry : out.entries) {
        const auto* ev = graph.event_of(entry.id);
        if (ev == nullptr) continue;
        auto any = [&](const std::set<std::string>& values, auto&& edge_holds) {
            return std::any_of(values.begin(), values.end(), edge_holds);
        };
        if (any(constraints.persons, [&](const std::string& p) {
                return graph.has_edge(EdgeKind::PARTICIPATES_IN, person_node(p), ev->id);
            })) {
            entry.score += bonuses.person;
        }
        if (any(constraints.places, [&](const std::string& p) {
                return graph.has_edge(EdgeKind::LOCATED_AT, ev->id, place_node(p));
            })) {
            entry.score += bonuses.place;
        }
        if (any(constraints.objects, [&](const std::string& o) {
                return graph.has_edge(EdgeKind::INVOLVES, ev->id, object_node(o));
            })) {
            entry.score += bonuses.object;
        }
    }
    out.sort();
    return out;
}

std::vector<std::string> traverse_precedes(const TemporalGraph& graph, const std::string& event_id,
                                           OrderDirection direction, int steps) {
    if (graph.event(event_id) == nullptr) throw NotFound("no event " + event_id);
    std::vector<std::string> out;
    std::string cur = event_id;
    for (int i = 0; i < steps; ++i) {
        auto nxt = direction == OrderDirection::after ? graph.next_event(cur) : graph.previous_event(cur);
        if (!nxt) break;
        out.push_back(*nxt);
        cur = *nxt;
    }
    return out;
}

}  // namespace lvqa
