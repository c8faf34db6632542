#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvqa/query_parser.hpp"
#include "lvqa/time_axis.hpp"

namespace lvqa {

struct SupportingView {
    CameraId camera;
    std::string window;

    bool operator==(const SupportingView&) const = default;
};

/// What the evaluator needs to tag failures; not part of the answer itself.
struct AnswerDiagnostics {
    std::vector<std::string> windows;  // primary bucket (SVA) or selected cells (TMKG)
    bool fallback_used = false;
    int verify_calls = 0;
    int accepted_reports = 0;
    int rejected_reports = 0;
    int supporting_reports = 0;
    std::string selection_mode;

    bool operator==(const AnswerDiagnostics&) const = default;
};

/// Final per-question output of either pipeline.
struct AnswerRecord {
    std::string question_id;
    std::string choice;
    double confidence = 0.0;
    std::vector<SupportingView> supporting_views;
    std::string rationale;
    int ledger_total = 0;
    std::string pipeline;
    AnswerDiagnostics diagnostics;

    bool operator==(const AnswerRecord&) const = default;
};

nlohmann::json to_json(const AnswerRecord& a);
AnswerRecord answer_from_json(const nlohmann::json& j);
void save_answers(std::span<const AnswerRecord> answers, const std::filesystem::path& path);
std::vector<AnswerRecord> load_answers(const std::filesystem::path& path);

/// Text with a weight, e.g. an evidence item weighted by tier.
struct WeightedText {
    std::string text;
    double weight = 1.0;
};

struct OverlapChoice {
    std::string label;
    double confidence = 0.0;
    std::vector<double> scores;  // per choice, A-D
};

/// Picks the label whose content tokens overlap the weighted texts most.
/// Ties go to `tentative` when it is among the best, else to the first best
/// label; with no overlap at all that is `tentative` or "A".
OverlapChoice overlap_choice(const Question& q, std::span<const WeightedText> texts,
                             const std::optional<std::string>& tentative = std::nullopt);

}  // namespace lvqa
