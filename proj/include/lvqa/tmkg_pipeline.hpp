#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "lvqa/answer.hpp"
#include "lvqa/model_gateway.hpp"
#include "lvqa/query_parser.hpp"
#include "lvqa/retrieval.hpp"
#include "lvqa/stores.hpp"
#include "lvqa/temporal_kg.hpp"

namespace lvqa {

struct TmkgConfig {
    double tau_score = 0.55;
    double tau_margin = 0.2;
    std::size_t k = 3;
    PredicateBonuses bonuses;
    /// Off: normalise the fused scores, then add bonuses (threshold is post-bonus).
    /// On: add bonuses to raw fused scores, then normalise.
    bool bonus_before_normalisation = false;
};

/// A 5-minute time cell across all cameras.
struct TimeCell {
    int day = 1;
    int slot = 0;

    TimeWindow window() const;
    auto operator<=>(const TimeCell&) const = default;
};

std::string key_string(const TimeCell& c);

struct SelectionResult {
    enum class Mode { single, concat };

    Mode mode = Mode::concat;
    std::vector<TimeCell> cells;
    double top_score = 0.0;
    double second_score = 0.0;
    double margin = 0.0;
    RankedList trace;              // cell level, after bonuses and remapping
    RankedList observation_trace;  // observation level, after bonuses
    bool remapped = false;
};

/// Threshold-gated cell selection over the observation index and the graph.
/// Throws EmptyGraph.
SelectionResult select_cells(const ParsedQuery& parsed, const TemporalGraph& graph,
                             const HybridIndex& observation_index, const TmkgConfig& config = {});

struct TmkgChannels {
    Channel* primary = nullptr;
    Channel* alternative = nullptr;
};

/// Builds the grounded answer request for the selected cells.
ModelRequest build_answer_request(const Question& q, const SelectionResult& selection,
                                  const TemporalGraph& graph);

/// One grounded answer call with the three-stage fallback
/// (alternative channel, caption excerpts, default value).
AnswerRecord answer_grounded(const Question& q, const SelectionResult& selection,
                             const TemporalGraph& graph, Gateway& gateway,
                             const TmkgChannels& channels);

AnswerRecord answer_question_tmkg(const Question& q, const CorpusStores& stores, Gateway& gateway,
                                  const TmkgChannels& channels, const TmkgConfig& config = {});

}  // namespace lvqa
