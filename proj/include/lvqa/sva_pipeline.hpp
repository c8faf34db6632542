#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lvqa/answer.hpp"
#include "lvqa/cell_index.hpp"
#include "lvqa/model_gateway.hpp"
#include "lvqa/query_parser.hpp"
#include "lvqa/retrieval.hpp"
#include "lvqa/stores.hpp"

namespace lvqa {

struct SvaConfig {
    std::size_t retrieve_cells = 8;     // hybrid candidates sent to the reranker
    std::size_t keep_cells = 3;         // cells passed to the bucket scorer
    std::size_t bucket_candidates = 6;  // buckets offered to the final pick
    std::size_t verify_cameras = 4;
    int span_before = 1;
    int span_after = 2;
    std::size_t excerpt_chars = 1200;
};

/// Channels per stage. `prior` is optional; when live it replaces the bucket
/// narrowing call so the per-question budget stays at 28.
struct SvaChannels {
    Channel* search = nullptr;
    Channel* verify = nullptr;
    Channel* judge = nullptr;
    Channel* prior = nullptr;
};

struct SearchOutcome {
    BucketKey primary_window;
    std::vector<std::pair<CameraId, BucketKey>> supporting;
    std::optional<std::string> tentative_choice;
    RankedList cell_trace;
    RankedList bucket_trace;
    bool used_fallback = false;
};

/// Claim kinds in evidence-priority order (ocr highest).
enum class ClaimKind { context = 0, visual = 1, audio_quote = 2, ocr = 3 };

std::string to_string(ClaimKind k);
std::optional<ClaimKind> claim_kind_from_string(std::string_view s);
int tier(ClaimKind k);

struct Localisation {
    CameraId camera;
    Seconds timestamp = 0;
    std::string region;

    bool operator==(const Localisation&) const = default;
};

struct Claim {
    ClaimKind kind = ClaimKind::visual;
    std::string text;
    std::vector<std::string> evidence_span_ids;
    std::vector<Localisation> localisations;
    std::optional<int> count_value;

    bool operator==(const Claim&) const = default;
};

enum class Verdict { supports, abstain };

struct VerifierReport {
    SubWindowKey subwindow;
    Verdict verdict = Verdict::abstain;
    std::optional<std::string> label;  // set when supports
    std::vector<Claim> claims;
    double confidence = 0.0;
    std::string note;
    bool error = false;

    static VerifierReport abstain(SubWindowKey key, std::string note);
    bool operator==(const VerifierReport&) const = default;
};

/// Parses a verify_v1 body.
VerifierReport report_from_json(const nlohmann::json& j, const SubWindowKey& key);
nlohmann::json to_json(const VerifierReport& r);

/// One evidence span shown to the verifier, with the claim kind it can back.
struct EvidenceSpan {
    std::string id;
    ClaimKind kind = ClaimKind::visual;
    std::string text;

    bool operator==(const EvidenceSpan&) const = default;
};

struct SubWindowEvidence {
    SubWindowKey key;
    std::vector<EvidenceSpan> spans;
    /// No transcript, caption, object or action content: a silent, contentless clip.
    bool empty_flag = true;
};

/// Spans of every record on the sub-window's camera overlapping its slot.
SubWindowEvidence collect_evidence(const LaneDatabase& db, const SubWindowKey& key);

/// Evidence part for one span: "[<id>] <kind>: <text>".
std::string format_span(const EvidenceSpan& span);
std::optional<EvidenceSpan> parse_span(std::string_view content);

/// Evidence part for one retrieval candidate: "id: <key>" then the excerpt.
std::string format_candidate(const std::string& id, std::string_view excerpt);
std::optional<std::string> parse_candidate_id(std::string_view content);

/// First `limit` bytes of `text`, cut back to a word boundary.
std::string excerpt(std::string_view text, std::size_t limit);

/// System text carrying the four anti-confabulation rules.
std::string_view verifier_system_prompt();

/// Verification request exactly as sent to the verifier channel.
ModelRequest build_verify_request(const Question& q, const SubWindowEvidence& evidence);

enum class RejectReason { none, ground, no_echo, abstain, localise };

std::string to_string(RejectReason r);

struct ValidationResult {
    bool accepted = true;
    RejectReason reason = RejectReason::none;
    std::string detail;

    static ValidationResult accept() { return {}; }
    static ValidationResult reject(RejectReason r, std::string detail) {
        return {false, r, std::move(detail)};
    }
};

inline constexpr std::size_t kEchoNgram = 6;

/// Structural checks on verifier output: GROUND, NO-ECHO, ABSTAIN, LOCALISE.
ValidationResult validate_report(const VerifierReport& r, std::span<const std::string> prompt_context,
                                 const std::map<std::string, EvidenceSpan>& evidence_spans,
                                 bool empty_flag);

/// Question text followed by each choice text.
std::vector<std::string> prompt_context(const Question& q);

/// Verifies one sub-window. Empty sub-windows abstain without a call;
/// gateway failures and validator rejections become abstain reports.
VerifierReport verify(const SubWindowKey& sub, const Question& q, const LaneDatabase& db,
                      const ModelBinding& model);

struct EvidenceItem {
    ClaimKind tier = ClaimKind::context;
    std::string text;
    SubWindowKey source;
    double confidence = 0.0;
    std::string dedup_key;

    bool operator==(const EvidenceItem&) const = default;
};

/// Flattens claims, orders by (tier desc, confidence desc, distance to the
/// primary window asc, source asc, text asc) and drops repeated quotes.
std::vector<EvidenceItem> rank_evidence(std::span<const VerifierReport> reports,
                                        const BucketKey& primary);

/// Hybrid cell retrieval, model rerank, bucket scoring and the final pick.
/// Throws EmptyCorpus when no cell has any content.
SearchOutcome search(const Question& q, const ParsedQuery& parsed, const CorpusStores& stores,
                     Gateway& gateway, const SvaChannels& channels, const SvaConfig& config = {});

/// Single judge call; deterministic tier-weighted overlap when it fails.
AnswerRecord judge(const Question& q, std::span<const EvidenceItem> ranked,
                   const SearchOutcome& outcome, const std::optional<ModelReply>& prior,
                   Gateway& gateway, Channel& judge_channel);

/// Cameras for sub-window expansion: supporting cameras first, padded in manifest order.
std::vector<CameraId> expansion_cameras(const SearchOutcome& outcome, const CorpusManifest& m,
                                        std::size_t count);

AnswerRecord answer_question_sva(const Question& q, const CorpusStores& stores, Gateway& gateway,
                                 const SvaChannels& channels, const SvaConfig& config = {});

}  // namespace lvqa
