#include "lvqa/sva_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

#include "lvqa/errors.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

using json = nlohmann::json;

constexpr std::pair<ClaimKind, std::string_view> kClaimKinds[] = {
    {ClaimKind::ocr, "ocr"}, {ClaimKind::audio_quote, "audio_quote"},
    {ClaimKind::visual, "visual"}, {ClaimKind::context, "context"}};

constexpr std::string_view kVerifierPrompt =
    "You verify one 5-minute clip from one camera against a multiple-choice question.\n"
    "Evidence spans are listed as [id] kind: text. Reply with JSON: "
    "{\"verdict\": \"supports\"|\"abstain\", \"label\": \"A\"-\"D\" when supporting, \"confidence\": 0-1, "
    "\"claims\": [{\"kind\": \"ocr\"|\"audio_quote\"|\"visual\"|\"context\", \"text\": ..., "
    "\"evidence_span_ids\": [...], \"localisations\": [{\"camera\", \"timestamp\", \"region\"}], "
    "\"count_value\": n}]}.\n"
    "Rules:\n"
    "1. No echo: never quote the question or the choices. Quotes must come from the spans.\n"
    "2. Abstain: if the clip shows nothing relevant, answer abstain.\n"
    "3. Localise: any counting claim lists where each counted item is (camera, timestamp, region).\n"
    "4. Ground: every claim cites the ids of the spans it rests on.";

constexpr std::string_view kRerankPrompt =
    "Rank the candidate hour cells by how likely they contain the answer to the question. "
    "Reply with JSON {\"ranking\": [cell ids, best first]}.";

constexpr std::string_view kNarrowPrompt =
    "Rank the candidate 15-minute buckets by how likely they contain the answer to the question. "
    "Reply with JSON {\"ranking\": [bucket ids, best first]}.";

constexpr std::string_view kFinalPrompt =
    "Pick the primary 15-minute window that answers the question, any supporting camera views, "
    "and a tentative answer. Reply with JSON {\"primary\": bucket id, "
    "\"supporting\": [{\"camera\": id, \"window\": bucket id}], \"tentative_choice\": \"A\"-\"D\" or null}.";

constexpr std::string_view kPriorPrompt =
    "Reason step by step about the question from general knowledge of daily household life. "
    "Reply with JSON {\"reasoning\": text, \"choice\": \"A\"-\"D\" or null}.";

constexpr std::string_view kJudgePrompt =
    "Answer the multiple-choice question from the ranked evidence. Trust evidence in the order "
    "ocr > audio_quote > visual > context. Reply with JSON {\"choice\": \"A\"-\"D\", \"confidence\": 0-1, "
    "\"supporting_views\": [{\"camera\": id, \"window\": key}], \"rationale\": text}.";

constexpr std::size_t kJudgeEvidenceLimit = 40;

Channel& or_disabled(Channel* ch) {
    static DisabledChannel disabled("unconfigured");
    return ch != nullptr ? *ch : disabled;
}

/// A schema-valid reply or nullopt; transport errors count as failures.
std::optional<json> try_send(Gateway& gateway, const ModelRequest& req, Channel* channel) {
    try {
        auto reply = gateway.send(req, or_disabled(channel));
        if (reply.parsed) return *reply.parsed;
    } catch (const GatewayError&) {
    } catch (const IoError&) {
    }
    return std::nullopt;
}

ClaimKind kind_of(const LaneRecord& r) {
    switch (r.lane()) {
        case Lane::transcript: return ClaimKind::audio_quote;
        case Lane::object: return r.as<ObjectPayload>().is_ocr() ? ClaimKind::ocr : ClaimKind::visual;
        case Lane::caption:
        case Lane::action: return ClaimKind::visual;
        case Lane::identity: return ClaimKind::context;
    }
    return ClaimKind::context;
}

bool run_in(const std::vector<std::string>& hay, std::span<const std::string> needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

std::vector<std::string> ordered_candidates(const json& ranking, const std::vector<std::string>& candidates) {
    std::set<std::string> allowed(candidates.begin(), candidates.end());
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& id : ranking) {
        auto s = id.get<std::string>();
        if (allowed.contains(s) && seen.insert(s).second) out.push_back(s);
    }
    for (const auto& c : candidates) {
        if (seen.insert(c).second) out.push_back(c);
    }
    return out;
}

std::optional<BucketKey> as_bucket(std::string_view id) {
    auto key = parse_key(id);
    if (!key || !std::holds_alternative<BucketKey>(*key)) return std::nullopt;
    return std::get<BucketKey>(*key);
}

int bucket_index_of_day(const BucketKey& b) { return b.cell.hour * 4 + b.quarter; }

std::optional<BucketKey> shifted_bucket(const BucketKey& b, int delta, const CorpusManifest& m) {
    int idx = bucket_index_of_day(b) + delta;
    if (idx < 0) return std::nullopt;
    BucketKey out{{b.cell.day, idx / 4}, idx % 4};
    const auto& span = m.span_for_day(b.cell.day);
    auto w = out.window();
    auto rel = TimeWindow{w.start - day_start(b.cell.day), w.end - day_start(b.cell.day)};
    if (rel.start < span.start || rel.end > span.end) return std::nullopt;
    return out;
}

double distance_to(const SubWindowKey& k, const BucketKey& primary) {
    return std::abs(k.window().midpoint() - primary.window().midpoint());
}

double tier_weight(ClaimKind k) {
    switch (k) {
        case ClaimKind::ocr: return 8.0;
        case ClaimKind::audio_quote: return 4.0;
        case ClaimKind::visual: return 2.0;
        case ClaimKind::context: return 1.0;
    }
    return 1.0;
}

std::string window_label(const SubWindowKey& k) {
    auto w = k.window();
    return "day " + std::to_string(k.day) + " " + clock_string(second_of_day(w.start)) + "-" +
           clock_string(second_of_day(w.end)) + " on " + k.camera;
}

}  // namespace

// ---------------------------------------------------------------- claims

std::string to_string(ClaimKind k) {
    for (auto [v, name] : kClaimKinds) {
        if (v == k) return std::string(name);
    }
    return "context";
}

std::optional<ClaimKind> claim_kind_from_string(std::string_view s) {
    for (auto [v, name] : kClaimKinds) {
        if (name == s) return v;
    }
    return std::nullopt;
}

int tier(ClaimKind k) { return static_cast<int>(k); }

std::string to_string(RejectReason r) {
    switch (r) {
        case RejectReason::none: return "none";
        case RejectReason::ground: return "GROUND";
        case RejectReason::no_echo: return "NO-ECHO";
        case RejectReason::abstain: return "ABSTAIN";
        case RejectReason::localise: return "LOCALISE";
    }
    return "?";
}

VerifierReport VerifierReport::abstain(SubWindowKey key, std::string note) {
    VerifierReport r;
    r.subwindow = std::move(key);
    r.note = std::move(note);
    return r;
}

VerifierReport report_from_json(const json& j, const SubWindowKey& key) {
    VerifierReport r;
    r.subwindow = key;
    try {
        r.verdict = j.at("verdict").get<std::string>() == "supports" ? Verdict::supports : Verdict::abstain;
        if (j.contains("label") && j["label"].is_string()) r.label = j["label"].get<std::string>();
        if (r.verdict == Verdict::abstain) r.label.reset();
        r.confidence = j.value("confidence", 0.0);
        for (const auto& c : j.at("claims")) {
            Claim claim;
            auto kind = claim_kind_from_string(c.at("kind").get<std::string>());
            if (!kind) throw SchemaViolation("unknown claim kind");
            claim.kind = *kind;
            claim.text = c.at("text").get<std::string>();
            claim.evidence_span_ids = c.at("evidence_span_ids").get<std::vector<std::string>>();
            for (const auto& l : c.value("localisations", json::array())) {
                claim.localisations.push_back(
                    {l.at("camera").get<std::string>(), l.at("timestamp").get<Seconds>(), l.at("region").get<std::string>()});
            }
            if (c.contains("count_value") && !c["count_value"].is_null()) claim.count_value = c["count_value"].get<int>();
            r.claims.push_back(std::move(claim));
        }
    } catch (const json::exception& e) {
        throw SchemaViolation(std::string("verify reply: ") + e.what());
    }
    return r;
}

json to_json(const VerifierReport& r) {
    json claims = json::array();
    for (const auto& c : r.claims) {
        json locs = json::array();
        for (const auto& l : c.localisations) {
            locs.push_back({{"camera", l.camera}, {"timestamp", l.timestamp}, {"region", l.region}});
        }
        json cj{{"kind", to_string(c.kind)},
                {"text", c.text},
                {"evidence_span_ids", c.evidence_span_ids},
                {"localisations", locs}};
        if (c.count_value) cj["count_value"] = *c.count_value;
        claims.push_back(std::move(cj));
    }
    json j{{"verdict", r.verdict == Verdict::supports ? "supports" : "abstain"},
           {"confidence", r.confidence},
           {"claims", claims}};
    if (r.label) j["label"] = *r.label;
    return j;
}

// ---------------------------------------------------------------- evidence

std::string format_span(const EvidenceSpan& span) {
    return "[" + span.id + "] " + to_string(span.kind) + ": " + span.text;
}

std::optional<EvidenceSpan> parse_span(std::string_view content) {
    if (!content.starts_with('[')) return std::nullopt;
    auto close = content.find("] ");
    if (close == std::string_view::npos) return std::nullopt;
    auto colon = content.find(": ", close + 2);
    if (colon == std::string_view::npos) return std::nullopt;
    auto kind = claim_kind_from_string(content.substr(close + 2, colon - close - 2));
    if (!kind) return std::nullopt;
    return EvidenceSpan{std::string(content.substr(1, close - 1)), *kind, std::string(content.substr(colon + 2))};
}

std::string format_candidate(const std::string& id, std::string_view text) {
    return "id: " + id + "\n" + std::string(text);
}

std::optional<std::string> parse_candidate_id(std::string_view content) {
    if (!content.starts_with("id: ")) return std::nullopt;
    auto nl = content.find('\n');
    return std::string(content.substr(4, nl == std::string_view::npos ? std::string_view::npos : nl - 4));
}

std::string excerpt(std::string_view text, std::size_t limit) {
    if (text.size() <= limit) return std::string(text);
    auto cut = text.rfind(' ', limit);
    if (cut == std::string_view::npos || cut == 0) cut = limit;
    // Never split a UTF-8 sequence.
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

SubWindowEvidence collect_evidence(const LaneDatabase& db, const SubWindowKey& key) {
    SubWindowEvidence ev;
    ev.key = key;
    auto w = key.window();
    int n = 0;
    for (const auto& r : db.all()) {
        if (r.window.start >= w.end) break;
        if (r.camera != key.camera || !overlaps(r.window, w)) continue;
        EvidenceSpan span{"S" + std::to_string(++n), kind_of(r), render_record(r)};
        if (r.lane() != Lane::identity) ev.empty_flag = false;
        ev.spans.push_back(std::move(span));
    }
    return ev;
}

std::string_view verifier_system_prompt() { return kVerifierPrompt; }

ModelRequest build_verify_request(const Question& q, const SubWindowEvidence& evidence) {
    ModelRequest req;
    req.question_id = q.id;
    req.role = Role::verify;
    req.system_text = std::string(kVerifierPrompt);
    req.expected_schema = "verify_v1";
    req.user_parts.push_back(UserPart::text(q.prompt_text()));
    req.user_parts.push_back(UserPart::text("clip: " + key_string(evidence.key) + " (" + window_label(evidence.key) + ")"));
    for (const auto& s : evidence.spans) req.user_parts.push_back(UserPart::evidence(format_span(s)));
    return req;
}

std::vector<std::string> prompt_context(const Question& q) {
    std::vector<std::string> out{q.text};
    for (const auto& c : q.choices) out.push_back(c.text);
    return out;
}

ValidationResult validate_report(const VerifierReport& r, std::span<const std::string> prompt_context,
                                 const std::map<std::string, EvidenceSpan>& evidence_spans, bool empty_flag) {
    if (empty_flag && r.verdict == Verdict::supports) {
        return ValidationResult::reject(RejectReason::abstain, "supports on a contentless clip");
    }
    if (r.verdict == Verdict::supports && r.claims.empty()) {
        return ValidationResult::reject(RejectReason::ground, "supports without claims");
    }
    for (const auto& c : r.claims) {
        if (c.evidence_span_ids.empty()) {
            return ValidationResult::reject(RejectReason::ground, "claim cites no span: " + c.text);
        }
        for (const auto& id : c.evidence_span_ids) {
            if (!evidence_spans.contains(id)) {
                return ValidationResult::reject(RejectReason::ground, "claim cites unknown span " + id);
            }
        }
    }

    std::vector<std::vector<std::string>> context_tokens;
    for (const auto& t : prompt_context) context_tokens.push_back(tokenize(t));
    for (const auto& c : r.claims) {
        if (c.kind != ClaimKind::audio_quote && c.kind != ClaimKind::ocr) continue;
        auto claim_tokens = tokenize(c.text);
        std::vector<std::vector<std::string>> cited;
        for (const auto& id : c.evidence_span_ids) cited.push_back(tokenize(evidence_spans.at(id).text));
        for (std::size_t n = kEchoNgram; n <= claim_tokens.size(); ++n) {
            for (std::size_t i = 0; i + n <= claim_tokens.size(); ++i) {
                std::span<const std::string> gram(claim_tokens.data() + i, n);
                bool from_prompt = std::any_of(context_tokens.begin(), context_tokens.end(),
                                               [&](const auto& ctx) { return run_in(ctx, gram); });
                if (!from_prompt) continue;
                bool in_evidence =
                    std::any_of(cited.begin(), cited.end(), [&](const auto& sp) { return run_in(sp, gram); });
                if (!in_evidence) {
                    return ValidationResult::reject(RejectReason::no_echo, "quote echoes the prompt: " + c.text);
                }
            }
        }
    }

    for (const auto& c : r.claims) {
        if (c.count_value && c.localisations.empty()) {
            return ValidationResult::reject(RejectReason::localise, "count without localisation: " + c.text);
        }
    }
    return ValidationResult::accept();
}

VerifierReport verify(const SubWindowKey& sub, const Question& q, const LaneDatabase& db,
                      const ModelBinding& model) {
    auto evidence = collect_evidence(db, sub);
    if (evidence.spans.empty()) return VerifierReport::abstain(sub, "no evidence in clip");
    if (model.gateway == nullptr) return VerifierReport::abstain(sub, "no gateway");

    auto req = build_verify_request(q, evidence);
    ModelReply reply;
    try {
        reply = model.gateway->send(req, or_disabled(model.channel));
    } catch (const Error& e) {
        auto r = VerifierReport::abstain(sub, std::string("verifier unavailable: ") + e.what());
        r.error = true;
        return r;
    }
    if (!reply.parsed) return VerifierReport::abstain(sub, "schema violation: " + reply.schema_error);

    VerifierReport report;
    try {
        report = report_from_json(*reply.parsed, sub);
    } catch (const SchemaViolation& e) {
        return VerifierReport::abstain(sub, std::string("schema violation: ") + e.what());
    }
    std::map<std::string, EvidenceSpan> spans;
    for (const auto& s : evidence.spans) spans.emplace(s.id, s);
    auto ctx = prompt_context(q);
    auto verdict = validate_report(report, ctx, spans, evidence.empty_flag);
    if (!verdict.accepted) {
        return VerifierReport::abstain(sub, "validator rejected (" + to_string(verdict.reason) + "): " + verdict.detail);
    }
    return report;
}

std::vector<EvidenceItem> rank_evidence(std::span<const VerifierReport> reports, const BucketKey& primary) {
    std::vector<EvidenceItem> items;
    for (const auto& r : reports) {
        for (const auto& c : r.claims) {
            items.push_back({c.kind, c.text, r.subwindow, r.confidence, normalize_text(c.text)});
        }
    }
    std::sort(items.begin(), items.end(), [&](const EvidenceItem& a, const EvidenceItem& b) {
        if (a.tier != b.tier) return tier(a.tier) > tier(b.tier);
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        double da = distance_to(a.source, primary);
        double db = distance_to(b.source, primary);
        if (da != db) return da < db;
        if (a.source != b.source) return a.source < b.source;
        return a.text < b.text;
    });
    std::set<std::string> emitted;
    std::vector<EvidenceItem> out;
    for (auto& item : items) {
        if (emitted.insert(item.dedup_key).second) out.push_back(std::move(item));
    }
    return out;
}

// ---------------------------------------------------------------- search

SearchOutcome search(const Question& q, const ParsedQuery& parsed, const CorpusStores& stores, Gateway& gateway,
                     const SvaChannels& channels, const SvaConfig& config) {
    const auto& cell_docs = stores.cells.documents();
    if (std::all_of(cell_docs.begin(), cell_docs.end(), [](const CellDocument& d) { return d.text.empty(); })) {
        throw EmptyCorpus("no cell has any content");
    }
    const auto& m = stores.db.manifest();
    auto query = q.prompt_text();

    DocFilter in_scope = [&parsed](std::string_view id) {
        auto key = parse_key(id);
        if (!key || !std::holds_alternative<CellKey>(*key)) return false;
        const auto& cell = std::get<CellKey>(*key);
        if (parsed.day && cell.day != *parsed.day) return false;
        if (parsed.time_range) {
            int lo = cell.hour * 60;
            int hi = lo + 59;
            if (hi < parsed.time_range->start || lo > parsed.time_range->end) return false;
        }
        return true;
    };
    auto cells = stores.cells.search(query, config.retrieve_cells, in_scope);
    if (cells.empty()) cells = stores.cells.search(query, config.retrieve_cells);
    // Content-bearing cells in scope fill up the candidate list.
    for (bool scoped : {true, false}) {
        for (const auto& d : cell_docs) {
            if (cells.size() >= config.retrieve_cells) break;
            auto id = key_string(d.key);
            if (d.text.empty() || (scoped && !in_scope(id))) continue;
            if (std::none_of(cells.entries.begin(), cells.entries.end(), [&](const ScoredDoc& s) { return s.id == id; })) {
                cells.entries.push_back({id, 0.0});
            }
        }
        if (!cells.empty()) break;
    }

    SearchOutcome out;
    out.cell_trace = cells;

    // 1. Cell rerank.
    std::vector<std::string> cell_ids;
    for (const auto& c : cells.entries) cell_ids.push_back(c.id);
    ModelRequest rerank{q.id, Role::search_rerank, std::string(kRerankPrompt), {UserPart::text(q.prompt_text())},
                        "rerank_v1"};
    for (const auto& id : cell_ids) {
        rerank.user_parts.push_back(UserPart::evidence(format_candidate(id, excerpt(stores.cells.find(id)->text, config.excerpt_chars))));
    }
    auto reranked = cell_ids;
    if (auto body = try_send(gateway, rerank, channels.search)) {
        reranked = ordered_candidates(body->at("ranking"), cell_ids);
    } else {
        out.used_fallback = true;
    }
    if (reranked.size() > config.keep_cells) reranked.resize(config.keep_cells);

    // 2. Bucket scoring, padded with the remaining content buckets of the kept cells.
    RankedList kept;
    for (const auto& id : reranked) kept.entries.push_back({id, 0.0});
    auto buckets = score_buckets(kept, stores.buckets, query, kept.size());
    for (const auto& id : reranked) {
        auto cell = std::get<CellKey>(*parse_key(id));
        for (int quarter = 0; quarter < 4; ++quarter) {
            auto bid = key_string(BucketKey{cell, quarter});
            const auto* doc = stores.buckets.find(bid);
            if (doc == nullptr || doc->text.empty()) continue;
            if (std::none_of(buckets.entries.begin(), buckets.entries.end(), [&](const ScoredDoc& s) { return s.id == bid; })) {
                buckets.entries.push_back({bid, 0.0});
            }
        }
    }
    std::vector<std::string> bucket_ids;
    for (const auto& b : buckets.entries) bucket_ids.push_back(b.id);
    if (bucket_ids.empty()) {
        // Kept cells hold no bucket text: fall back to the first bucket of the best cell.
        auto cell = std::get<CellKey>(*parse_key(reranked.front()));
        bucket_ids.push_back(key_string(BucketKey{cell, 0}));
    }

    // 3. Bucket narrowing; skipped when the prior channel takes its slot in the budget.
    auto narrowed = bucket_ids;
    if (channels.prior == nullptr) {
        ModelRequest narrow{q.id, Role::search_rerank, std::string(kNarrowPrompt), {UserPart::text(q.prompt_text())},
                            "rerank_v1"};
        for (const auto& id : bucket_ids) {
            const auto* doc = stores.buckets.find(id);
            narrow.user_parts.push_back(
                UserPart::evidence(format_candidate(id, excerpt(doc ? doc->text : "", config.excerpt_chars))));
        }
        if (auto body = try_send(gateway, narrow, channels.search)) {
            narrowed = ordered_candidates(body->at("ranking"), bucket_ids);
        } else {
            out.used_fallback = true;
        }
    }
    if (narrowed.size() > config.bucket_candidates) narrowed.resize(config.bucket_candidates);
    if (parsed.intent == Intent::order_before_after) {
        auto top = *as_bucket(narrowed.front());
        for (int delta : {-1, 1}) {
            auto nb = shifted_bucket(top, delta, m);
            if (!nb) continue;
            auto id = key_string(*nb);
            if (std::find(narrowed.begin(), narrowed.end(), id) == narrowed.end()) narrowed.push_back(id);
        }
    }
    for (const auto& id : narrowed) out.bucket_trace.entries.push_back({id, 0.0});

    // 4. Final pick.
    ModelRequest final_req{q.id, Role::search_final, std::string(kFinalPrompt), {UserPart::text(q.prompt_text())},
                           "search_final_v1"};
    for (const auto& id : narrowed) {
        const auto* doc = stores.buckets.find(id);
        final_req.user_parts.push_back(
            UserPart::evidence(format_candidate(id, excerpt(doc ? doc->text : "", config.excerpt_chars))));
    }
    out.primary_window = *as_bucket(narrowed.front());
    auto body = try_send(gateway, final_req, channels.search);
    auto picked = body ? as_bucket(body->at("primary").get<std::string>()) : std::nullopt;
    if (!body || !picked || std::find(narrowed.begin(), narrowed.end(), key_string(*picked)) == narrowed.end()) {
        out.used_fallback = true;
        return out;
    }
    out.primary_window = *picked;
    for (const auto& s : body->value("supporting", json::array())) {
        auto camera = s.at("camera").get<std::string>();
        auto window = as_bucket(s.at("window").get<std::string>());
        if (!window || m.find_camera(camera) == nullptr || window->cell.day != picked->cell.day) continue;
        if (std::abs(bucket_index_of_day(*window) - bucket_index_of_day(*picked)) > 1) continue;
        out.supporting.emplace_back(camera, *window);
    }
    if (body->contains("tentative_choice") && (*body)["tentative_choice"].is_string()) {
        out.tentative_choice = (*body)["tentative_choice"].get<std::string>();
    }
    return out;
}

// ---------------------------------------------------------------- answer

AnswerRecord judge(const Question& q, std::span<const EvidenceItem> ranked, const SearchOutcome& outcome,
                   const std::optional<ModelReply>& prior, Gateway& gateway, Channel& judge_channel) {
    ModelRequest req{q.id, Role::judge, std::string(kJudgePrompt), {UserPart::text(q.prompt_text())}, "answer_v1"};
    for (std::size_t i = 0; i < ranked.size() && i < kJudgeEvidenceLimit; ++i) {
        const auto& item = ranked[i];
        req.user_parts.push_back(UserPart::evidence("(" + to_string(item.tier) + ", " + key_string(item.source) +
                                                    ", confidence " + std::to_string(item.confidence) + ") " +
                                                    item.text));
    }
    if (outcome.tentative_choice) {
        req.user_parts.push_back(UserPart::text("tentative answer from search: " + *outcome.tentative_choice));
    }
    if (prior && prior->parsed) {
        req.user_parts.push_back(UserPart::text("external reasoning prior: " + prior->parsed->value("reasoning", "")));
    }

    AnswerRecord a;
    a.question_id = q.id;
    a.pipeline = "sva";
    if (auto body = try_send(gateway, req, &judge_channel)) {
        a.choice = body->at("choice").get<std::string>();
        a.confidence = body->at("confidence").get<double>();
        a.rationale = body->value("rationale", "");
        for (const auto& v : body->value("supporting_views", json::array())) {
            if (v.is_string()) {
                a.supporting_views.push_back({v.get<std::string>(), ""});
            } else {
                a.supporting_views.push_back({v.at("camera").get<std::string>(), v.value("window", "")});
            }
        }
        return a;
    }

    std::vector<WeightedText> texts;
    for (const auto& item : ranked) texts.push_back({item.text, tier_weight(item.tier)});
    auto pick = overlap_choice(q, texts, outcome.tentative_choice);
    a.choice = pick.label;
    a.confidence = pick.confidence;
    a.rationale = "judge unavailable; tier-weighted evidence overlap";
    a.diagnostics.fallback_used = true;
    std::set<std::string> seen;
    for (const auto& item : ranked) {
        auto id = key_string(item.source);
        if (seen.insert(id).second) a.supporting_views.push_back({item.source.camera, id});
        if (a.supporting_views.size() >= 4) break;
    }
    return a;
}

std::vector<CameraId> expansion_cameras(const SearchOutcome& outcome, const CorpusManifest& m, std::size_t count) {
    std::vector<CameraId> out;
    auto add = [&](const CameraId& c) {
        if (out.size() < count && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    };
    for (const auto& [camera, _] : outcome.supporting) add(camera);
    for (const auto& c : m.cameras) add(c.id);
    return out;
}

AnswerRecord answer_question_sva(const Question& q, const CorpusStores& stores, Gateway& gateway,
                                 const SvaChannels& channels, const SvaConfig& config) {
    const auto& m = stores.db.manifest();
    auto parsed = parse_question(q, m, stores.catalogs, stores.lexicons);
    auto outcome = search(q, parsed, stores, gateway, channels, config);

    // Keep the slot count when a day boundary clips one side.
    auto [room_before, room_after] = slot_room(outcome.primary_window, m);
    int before = config.span_before;
    int after = config.span_after;
    if (before > room_before) {
        after += before - room_before;
        before = room_before;
    }
    if (after > room_after) {
        before = std::min(room_before, before + after - room_after);
        after = room_after;
    }
    auto cameras = expansion_cameras(outcome, m, config.verify_cameras);
    auto subs = adjacent_subwindows(outcome.primary_window, cameras, before, after, m);

    ModelBinding binding{&gateway, channels.verify != nullptr ? channels.verify : &or_disabled(nullptr)};
    std::vector<std::future<VerifierReport>> pending;
    for (const auto& sub : subs) {
        pending.push_back(std::async(std::launch::async, [&, sub] { return verify(sub, q, stores.db, binding); }));
    }
    std::vector<VerifierReport> reports;
    for (auto& f : pending) reports.push_back(f.get());

    AnswerDiagnostics diag;
    diag.windows = {key_string(outcome.primary_window)};
    for (const auto& r : reports) {
        bool rejected = r.note.starts_with("validator rejected");
        if (rejected) ++diag.rejected_reports;
        else if (!r.error) ++diag.accepted_reports;
        if (r.verdict == Verdict::supports) ++diag.supporting_reports;
    }
    diag.verify_calls = static_cast<int>(std::count_if(reports.begin(), reports.end(), [](const VerifierReport& r) {
        return r.note != "no evidence in clip";
    }));
    auto ranked = rank_evidence(reports, outcome.primary_window);

    std::optional<ModelReply> prior;
    if (channels.prior != nullptr) {
        ModelRequest req{q.id, Role::prior, std::string(kPriorPrompt), {UserPart::text(q.prompt_text())}, "prior_v1"};
        try {
            prior = gateway.send(req, *channels.prior);
        } catch (const Error&) {
        }
    }

    auto answer = judge(q, ranked, outcome, prior, gateway, or_disabled(channels.judge));
    answer.diagnostics.windows = diag.windows;
    answer.diagnostics.verify_calls = diag.verify_calls;
    answer.diagnostics.accepted_reports = diag.accepted_reports;
    answer.diagnostics.rejected_reports = diag.rejected_reports;
    answer.diagnostics.supporting_reports = diag.supporting_reports;
    answer.diagnostics.fallback_used = answer.diagnostics.fallback_used || outcome.used_fallback;
    answer.diagnostics.selection_mode = "primary_window";
    answer.ledger_total = gateway.ledger().has(q.id) ? gateway.ledger().report(q.id).total : 0;
    return answer;
}

}  // namespace lvqa
