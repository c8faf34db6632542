#include "lvqa/tmkg_pipeline.hpp"

#include <algorithm>
#include <map>

#include "lvqa/errors.hpp"

namespace lvqa {
namespace {

using json = nlohmann::json;

constexpr std::string_view kAnswerPrompt =
    "Answer the multiple-choice question from the bundled observations of the selected time cells. "
    "Reply with JSON {\"choice\": \"A\"-\"D\", \"confidence\": 0-1, "
    "\"supporting_views\": [{\"camera\": id, \"window\": key}], \"rationale\": text}.";

constexpr double kTranscriptWeight = 4.0;
constexpr double kCaptionWeight = 2.0;

TimeCell cell_of(const SubWindowKey& k) { return {k.day, k.slot}; }

TimeCell cell_of(const TimeWindow& w) {
    return {day_of(w.start), static_cast<int>(second_of_day(w.start) / kSlotSeconds)};
}

std::vector<const Observation*> observations_in(const TemporalGraph& graph, const std::vector<TimeCell>& cells) {
    std::vector<const Observation*> out;
    for (const auto& cell : cells) {
        for (const auto& o : graph.observations()) {
            if (cell_of(o.key) == cell) out.push_back(&o);
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

json overlap_reply(const OverlapChoice& pick, std::string rationale) {
    return {{"choice", pick.label},
            {"confidence", pick.confidence},
            {"supporting_views", json::array()},
            {"rationale", std::move(rationale)}};
}

}  // namespace

TimeWindow TimeCell::window() const {
    Seconds s = day_start(day) + slot * kSlotSeconds;
    return {s, s + kSlotSeconds};
}

std::string key_string(const TimeCell& c) {
    return "slot:" + std::to_string(c.day) + ":" + std::to_string(c.slot);
}

SelectionResult select_cells(const ParsedQuery& parsed, const TemporalGraph& graph,
                             const HybridIndex& observation_index, const TmkgConfig& config) {
    if (graph.observations().empty()) throw EmptyGraph("the graph has no observations");

    DocFilter in_scope = [&parsed](std::string_view id) {
        auto key = parse_key(id);
        if (!key || !std::holds_alternative<SubWindowKey>(*key)) return false;
        const auto& sub = std::get<SubWindowKey>(*key);
        if (parsed.day && sub.day != *parsed.day) return false;
        if (parsed.time_range) {
            int lo = sub.slot * 5;
            int hi = lo + 4;
            if (hi < parsed.time_range->start || lo > parsed.time_range->end) return false;
        }
        return true;
    };
    auto all = observation_index.documents().size();
    auto base = observation_index.search(parsed.raw, all, in_scope);
    if (base.empty()) base = observation_index.search(parsed.raw, all);

    SelectionResult out;
    if (base.empty()) return out;

    auto normalise = [](RankedList& list) {
        double top = list.entries.front().score;
        if (top <= 0.0) return;
        for (auto& e : list.entries) e.score /= top;
    };
    RankedList scored = base;
    if (config.bonus_before_normalisation) {
        scored = rerank_with_predicates(scored, parsed, graph, config.bonuses);
        normalise(scored);
    } else {
        normalise(scored);
        scored = rerank_with_predicates(scored, parsed, graph, config.bonuses);
    }
    out.observation_trace = scored;

    // Collapse to time cells by max observation score.
    std::map<TimeCell, double> best;
    for (const auto& e : scored.entries) {
        const auto* o = graph.observation(e.id);
        if (o == nullptr) continue;
        auto cell = cell_of(o->key);
        auto it = best.find(cell);
        if (it == best.end() || e.score > it->second) best[cell] = e.score;
    }
    RankedList cells;
    for (const auto& [cell, score] : best) cells.entries.push_back({key_string(cell), score});
    cells.sort();
    std::map<std::string, TimeCell> by_key;
    for (const auto& [cell, _] : best) by_key[key_string(cell)] = cell;

    if (parsed.intent == Intent::order_before_after && !scored.empty()) {
        const auto* ev = graph.event_of(scored.entries.front().id);
        if (ev != nullptr) {
            auto hop = traverse_precedes(graph, ev->id, parsed.direction.value_or(OrderDirection::after), 1);
            if (!hop.empty()) {
                auto target = cell_of(graph.event(hop.front())->span);
                auto id = key_string(target);
                std::erase_if(cells.entries, [&](const ScoredDoc& d) { return d.id == id; });
                cells.entries.front().id = id;
                by_key[id] = target;
                out.remapped = true;
            }
        }
    }
    out.trace = cells;

    out.top_score = cells.entries.front().score;
    out.second_score = cells.size() > 1 ? cells.entries[1].score : 0.0;
    out.margin = out.top_score > 0.0 ? (out.top_score - out.second_score) / out.top_score : 0.0;
    if (out.top_score >= config.tau_score && out.margin >= config.tau_margin) {
        out.mode = SelectionResult::Mode::single;
        out.cells = {by_key.at(cells.entries.front().id)};
    } else {
        out.mode = SelectionResult::Mode::concat;
        for (std::size_t i = 0; i < cells.size() && i < config.k; ++i) out.cells.push_back(by_key.at(cells.entries[i].id));
    }
    return out;
}

ModelRequest build_answer_request(const Question& q, const SelectionResult& selection, const TemporalGraph& graph) {
    ModelRequest req{q.id, Role::tmkg_answer, std::string(kAnswerPrompt), {UserPart::text(q.prompt_text())},
                     "answer_v1"};
    for (const auto& cell : selection.cells) {
        auto w = cell.window();
        req.user_parts.push_back(UserPart::text("cell " + key_string(cell) + " (day " + std::to_string(cell.day) + " " +
                                                clock_string(second_of_day(w.start)) + "-" +
                                                clock_string(second_of_day(w.end)) + ")"));
        for (const auto* o : observations_in(graph, {cell})) {
            std::string bundle = "observation " + o->id + " camera " + o->key.camera;
            if (o->place) bundle += " place " + *o->place;
            if (!o->transcript_texts.empty()) bundle += "\ntranscripts: " + join(o->transcript_texts, " | ");
            if (!o->caption_texts.empty()) bundle += "\ncaptions: " + join(o->caption_texts, " | ");
            if (!o->ocr_texts.empty()) bundle += "\non-screen text: " + join(o->ocr_texts, " | ");
            if (!o->object_labels.empty()) bundle += "\nobjects: " + join(o->object_labels, ", ");
            if (!o->tags.empty()) bundle += "\ntags: " + join(o->tags, ", ");
            req.user_parts.push_back(UserPart::evidence(bundle));
        }
    }
    return req;
}

AnswerRecord answer_grounded(const Question& q, const SelectionResult& selection, const TemporalGraph& graph,
                             Gateway& gateway, const TmkgChannels& channels) {
    auto req = build_answer_request(q, selection, graph);
    auto observations = observations_in(graph, selection.cells);

    std::vector<WeightedText> captions;
    std::vector<WeightedText> bundled;
    for (const auto* o : observations) {
        for (const auto& t : o->caption_texts) {
            captions.push_back({t, kCaptionWeight});
            bundled.push_back({t, kCaptionWeight});
        }
        for (const auto& t : o->transcript_texts) bundled.push_back({t, kTranscriptWeight});
    }

    LocalChannel caption_stage("caption-excerpts", [&](const ModelRequest&) -> std::string {
        auto pick = overlap_choice(q, captions);
        if (pick.confidence <= 0.0) throw HttpError("caption excerpts share no words with any choice");
        return overlap_reply(pick, "caption excerpt overlap").dump();
    });
    DisabledChannel none("unconfigured");
    Channel* chain[] = {channels.primary != nullptr ? channels.primary : &none,
                        channels.alternative != nullptr ? channels.alternative : &none, &caption_stage};
    DefaultReplyFn default_fn = [&](const ModelRequest&) {
        return overlap_reply(overlap_choice(q, bundled), "default: transcript and caption overlap");
    };
    auto reply = gateway.run_with_fallback(req, chain, default_fn);

    AnswerRecord a;
    a.question_id = q.id;
    a.pipeline = "tmkg";
    const auto& body = reply.require();
    a.choice = body.at("choice").get<std::string>();
    a.confidence = body.at("confidence").get<double>();
    a.rationale = body.value("rationale", "");
    for (const auto& v : body.value("supporting_views", json::array())) {
        if (v.is_string()) {
            a.supporting_views.push_back({v.get<std::string>(), ""});
        } else {
            a.supporting_views.push_back({v.at("camera").get<std::string>(), v.value("window", "")});
        }
    }
    a.diagnostics.fallback_used = reply.synthetic || (channels.primary == nullptr) ||
                                  reply.backend_id != channels.primary->id();
    a.diagnostics.selection_mode = selection.mode == SelectionResult::Mode::single ? "single" : "concat";
    for (const auto& c : selection.cells) a.diagnostics.windows.push_back(key_string(c));
    return a;
}

AnswerRecord answer_question_tmkg(const Question& q, const CorpusStores& stores, Gateway& gateway,
                                  const TmkgChannels& channels, const TmkgConfig& config) {
    auto parsed = parse_question(q, stores.db.manifest(), stores.catalogs, stores.lexicons);
    auto selection = select_cells(parsed, stores.graph, stores.observations, config);
    auto answer = answer_grounded(q, selection, stores.graph, gateway, channels);
    answer.ledger_total = gateway.ledger().has(q.id) ? gateway.ledger().report(q.id).total : 0;
    return answer;
}

}  // namespace lvqa
