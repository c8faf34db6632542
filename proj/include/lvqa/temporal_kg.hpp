#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvqa/cell_index.hpp"
#include "lvqa/lane_store.hpp"
#include "lvqa/query_parser.hpp"
#include "lvqa/retrieval.hpp"

namespace lvqa {

/// Evidence bundle of one (camera, 5-minute slot).
struct Observation {
    std::string id;
    SubWindowKey key;
    std::vector<std::string> transcript_texts;
    std::vector<std::string> caption_texts;
    std::vector<ActionTuple> action_tuples;
    std::vector<std::string> object_labels;  // one entry per detection
    std::vector<std::string> ocr_texts;
    std::vector<std::string> tags;           // sorted
    std::set<PersonId> persons;
    std::optional<std::string> place;
    std::string summary;

    std::set<std::string> verbs() const;
    bool operator==(const Observation&) const = default;
};

/// Multi-view aggregate of Observations.
struct GlobalEvent {
    std::string id;
    std::vector<std::string> members;  // sorted observation ids
    TimeWindow span;
    std::set<PersonId> persons;
    std::optional<std::string> place;
    std::set<std::string> verbs;
    std::set<std::string> tags;

    bool operator==(const GlobalEvent&) const = default;
};

enum class EdgeKind { EVIDENCE, PARTICIPATES_IN, LOCATED_AT, INVOLVES, PRECEDES };

std::string to_string(EdgeKind k);
EdgeKind edge_kind_from_string(std::string_view s);

struct TypedEdge {
    EdgeKind kind = EdgeKind::EVIDENCE;
    std::string from;
    std::string to;

    auto operator<=>(const TypedEdge&) const = default;
};

// Node ids outside observations/events.
std::string person_node(const PersonId& p);
std::string place_node(const std::string& place);
std::string object_node(const std::string& label);

struct ObservationConfig {
    std::size_t tag_count = 8;
    std::size_t summary_budget = 2000;
};

/// One Observation per (camera, slot) holding at least one transcript,
/// caption, object or action record. Identity records only contribute persons.
std::vector<Observation> build_observations(const LaneDatabase& db,
                                            std::span<const std::string> gazetteer,
                                            ObservationConfig config = {});

struct MergeConfig {
    double person_jaccard = 0.5;
    double tag_jaccard = 0.3;
};

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Same slot, equal place, person Jaccard and (shared verb or tag Jaccard).
bool should_merge(const Observation& a, const Observation& b, MergeConfig config = {});

struct Aggregation {
    std::vector<GlobalEvent> events;   // sorted by (span.start, id)
    std::vector<TypedEdge> evidence;   // one EVIDENCE edge per member
};

/// Connected components of the merge relation (union-find).
Aggregation aggregate_global_events(std::span<const Observation> observations,
                                    MergeConfig config = {});

struct LinkConfig {
    int object_floor = 2;
};

/// PARTICIPATES_IN, LOCATED_AT, INVOLVES and the global PRECEDES chain.
std::vector<TypedEdge> link_edges(std::span<const GlobalEvent> events,
                                  std::span<const Observation> observations,
                                  LinkConfig config = {});

/// PRECEDES chain over events ordered by (span.start, id).
std::vector<TypedEdge> precedes_chain(std::span<const GlobalEvent> events);

/// Checks the endpoint kinds of every edge; throws ValidationError.
void validate_edges(std::span<const TypedEdge> edges, std::span<const Observation> observations,
                    std::span<const GlobalEvent> events);

struct SegmentKey {
    int day = 1;
    int hour = 0;

    auto operator<=>(const SegmentKey&) const = default;
};

/// One independently persisted (day, hour) slice of the graph.
struct GraphSegment {
    SegmentKey key;
    std::vector<Observation> observations;
    std::vector<GlobalEvent> events;
    std::vector<TypedEdge> edges;

    bool operator==(const GraphSegment&) const = default;
};

struct GraphConfig {
    ObservationConfig observations;
    MergeConfig merge;
    LinkConfig link;
};

/// The whole temporal graph with lookup tables. Immutable once built.
class TemporalGraph {
public:
    TemporalGraph() = default;
    TemporalGraph(std::vector<Observation> observations, std::vector<GlobalEvent> events,
                  std::vector<TypedEdge> edges);

    static TemporalGraph build(const LaneDatabase& db, std::span<const std::string> gazetteer,
                               GraphConfig config = {});
    /// Reassembles segments and re-stitches PRECEDES across segment boundaries.
    static TemporalGraph from_segments(std::span<const GraphSegment> segments);

    std::vector<GraphSegment> segments() const;

    const std::vector<Observation>& observations() const { return observations_; }
    const std::vector<GlobalEvent>& events() const { return events_; }
    const std::vector<TypedEdge>& edges() const { return edges_; }

    const Observation* observation(const std::string& id) const;
    const GlobalEvent* event(const std::string& id) const;
    /// Event holding an observation, or nullptr.
    const GlobalEvent* event_of(const std::string& observation_id) const;
    bool has_edge(EdgeKind kind, const std::string& from, const std::string& to) const;
    std::optional<std::string> next_event(const std::string& event_id) const;
    std::optional<std::string> previous_event(const std::string& event_id) const;

    /// Observation-summary documents keyed by observation id.
    std::vector<CellDocument> observation_documents() const;

private:
    std::vector<Observation> observations_;
    std::vector<GlobalEvent> events_;
    std::vector<TypedEdge> edges_;
    std::map<std::string, std::size_t> obs_index_;
    std::map<std::string, std::size_t> event_index_;
    std::map<std::string, std::string> obs_to_event_;
    std::set<TypedEdge> edge_set_;
    std::map<std::string, std::string> next_;
    std::map<std::string, std::string> prev_;
};

SegmentKey segment_key_of(const TimeWindow& w);
std::filesystem::path segment_path(const std::filesystem::path& dir, SegmentKey key);

/// Writes kg/<day>_<hour>.segment.json: the body line then a checksum record.
std::filesystem::path persist_segment(const GraphSegment& segment, const std::filesystem::path& dir);
/// Throws NotFound, CorruptSegment.
GraphSegment load_segment(const std::filesystem::path& dir, SegmentKey key);
std::vector<GraphSegment> load_all_segments(const std::filesystem::path& dir);

nlohmann::json to_json(const GraphSegment& s);
GraphSegment segment_from_json(const nlohmann::json& j);

struct PredicateBonuses {
    double person = 0.3;
    double place = 0.2;
    double object = 0.2;
};

/// Adds a bonus per satisfied constraint kind (person via PARTICIPATES_IN,
/// place via LOCATED_AT, object via INVOLVES) on each observation's event.
RankedList rerank_with_predicates(const RankedList& base, const ParsedQuery& constraints,
                                  const TemporalGraph& graph, PredicateBonuses bonuses = {});

/// Follows PRECEDES up to `steps` hops. Throws NotFound for unknown events.
std::vector<std::string> traverse_precedes(const TemporalGraph& graph, const std::string& event_id,
                                           OrderDirection direction, int steps);

}  // namespace lvqa
