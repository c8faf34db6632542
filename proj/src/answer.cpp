#include "lvqa/answer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "lvqa/errors.hpp"
#include "lvqa/text.hpp"

namespace lvqa {

using json = nlohmann::json;

json to_json(const AnswerRecord& a) {
    json views = json::array();
    for (const auto& v : a.supporting_views) views.push_back({{"camera", v.camera}, {"window", v.window}});
    const auto& d = a.diagnostics;
    return {{"question_id", a.question_id},
            {"choice", a.choice},
            {"confidence", a.confidence},
            {"supporting_views", views},
            {"rationale", a.rationale},
            {"ledger_total", a.ledger_total},
            {"pipeline", a.pipeline},
            {"diagnostics",
             {{"windows", d.windows},
              {"fallback_used", d.fallback_used},
              {"verify_calls", d.verify_calls},
              {"accepted_reports", d.accepted_reports},
              {"rejected_reports", d.rejected_reports},
              {"supporting_reports", d.supporting_reports},
              {"selection_mode", d.selection_mode}}}};
}

AnswerRecord answer_from_json(const json& j) {
    AnswerRecord a;
    try {
        a.question_id = j.at("question_id").get<std::string>();
        a.choice = j.at("choice").get<std::string>();
        a.confidence = j.at("confidence").get<double>();
        for (const auto& v : j.value("supporting_views", json::array())) {
            a.supporting_views.push_back({v.at("camera").get<std::string>(), v.value("window", "")});
        }
        a.rationale = j.value("rationale", "");
        a.ledger_total = j.value("ledger_total", 0);
        a.pipeline = j.value("pipeline", "");
        if (j.contains("diagnostics")) {
            const auto& d = j.at("diagnostics");
            a.diagnostics.windows = d.value("windows", std::vector<std::string>{});
            a.diagnostics.fallback_used = d.value("fallback_used", false);
            a.diagnostics.verify_calls = d.value("verify_calls", 0);
            a.diagnostics.accepted_reports = d.value("accepted_reports", 0);
            a.diagnostics.rejected_reports = d.value("rejected_reports", 0);
            a.diagnostics.supporting_reports = d.value("supporting_reports", 0);
            a.diagnostics.selection_mode = d.value("selection_mode", "");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad answer record: ") + e.what(), 0);
    }
    if (!is_choice_label(a.choice)) throw ValidationError("answer " + a.question_id + " has choice '" + a.choice + "'");
    return a;
}

void save_answers(std::span<const AnswerRecord> answers, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& a : answers) out << to_json(a).dump() << '\n';
}

std::vector<AnswerRecord> load_answers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open answers " + path.string());
    std::vector<AnswerRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(answer_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), n);
        }
    }
    return out;
}

OverlapChoice overlap_choice(const Question& q, std::span<const WeightedText> texts,
                             const std::optional<std::string>& tentative) {
    std::vector<std::set<std::string>> text_tokens;
    for (const auto& t : texts) {
        auto toks = content_tokens(t.text);
        text_tokens.emplace_back(toks.begin(), toks.end());
    }
    OverlapChoice out;
    for (const auto& c : q.choices) {
        auto toks = content_tokens(c.text);
        std::set<std::string> choice_tokens(toks.begin(), toks.end());
        double score = 0.0;
        if (!choice_tokens.empty()) {
            for (std::size_t i = 0; i < texts.size(); ++i) {
                std::size_t hit = 0;
                for (const auto& t : choice_tokens) hit += text_tokens[i].count(t);
                score += texts[i].weight * static_cast<double>(hit) / static_cast<double>(choice_tokens.size());
            }
        }
        out.scores.push_back(score);
    }

    double best = out.scores.empty() ? 0.0 : *std::max_element(out.scores.begin(), out.scores.end());
    double total = 0.0;
    for (double s : out.scores) total += s;
    std::vector<std::string> best_labels;
    for (std::size_t i = 0; i < q.choices.size(); ++i) {
        if (out.scores[i] == best) best_labels.push_back(q.choices[i].label);
    }
    bool tentative_best =
        tentative && std::find(best_labels.begin(), best_labels.end(), *tentative) != best_labels.end();
    if (tentative_best) {
        out.label = *tentative;
    } else if (!best_labels.empty()) {
        out.label = best_labels.front();
    } else {
        out.label = "A";
    }
    out.confidence = total > 0.0 ? best / total : 0.0;
    return out;
}

}  // namespace lvqa
