#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lvqa/manifest.hpp"

namespace lvqa {

inline constexpr std::array<char, 4> kChoiceLabels = {'A', 'B', 'C', 'D'};

struct Choice {
    std::string label;
    std::string text;

    bool operator==(const Choice&) const = default;
};

/// A four-choice question; `answer` is the gold label (harness only).
struct Question {
    std::string id;
    std::string text;
    std::vector<Choice> choices;
    std::optional<std::string> answer;

    /// Throws ValidationError unless there are exactly four choices labelled A-D.
    void validate() const;
    const Choice* choice(std::string_view label) const;
    /// Question plus labelled choices, one per line.
    std::string prompt_text() const;

    bool operator==(const Question&) const = default;
};

nlohmann::json to_json(const Question& q);
Question question_from_json(const nlohmann::json& j);
std::vector<Question> load_questions(const std::filesystem::path& path);
void save_questions(const std::vector<Question>& qs, const std::filesystem::path& path);

bool is_choice_label(std::string_view s);

enum class Intent { who, where, when, what, count, order_before_after, other };

std::string to_string(Intent i);
Intent intent_from_string(std::string_view s);

enum class OrderDirection { before, after };

/// Closed interval of minutes of day.
struct MinuteRange {
    int start = 0;
    int end = 0;

    bool operator==(const MinuteRange&) const = default;
};

struct ParsedQuery {
    std::optional<int> day;
    std::optional<MinuteRange> time_range;
    std::set<PersonId> persons;
    std::set<std::string> places;
    std::set<std::string> objects;
    std::set<std::string> actions;
    Intent intent = Intent::other;
    std::optional<OrderDirection> direction;
    std::string raw;

    bool has_relational_constraints() const {
        return !persons.empty() || !places.empty() || !objects.empty();
    }
    bool operator==(const ParsedQuery&) const = default;
};

/// Entity catalogs shared by parsing, graph building and reranking.
struct Catalogs {
    struct Person {
        PersonId id;
        std::vector<std::string> names;  // surface forms, any case
    };
    std::vector<Person> persons;
    std::vector<std::string> places;
    std::vector<std::string> objects;

    static Catalogs from_manifest(const CorpusManifest& m, std::vector<std::string> places,
                                  std::vector<std::string> objects);
    /// persons.json / places.json / objects.json in `dir`.
    static Catalogs load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;
};

/// Parser configuration (lexicons.json).
struct Lexicons {
    std::map<std::string, MinuteRange> dayparts;
    std::map<std::string, int> day_names;
    /// Ordered rules: the first phrase found decides the intent.
    std::vector<std::pair<std::string, Intent>> intent_phrases;
    std::vector<std::string> verbs;

    static Lexicons defaults();
    static Lexicons load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Rule-based parse. Entities come from the question and all choices; day and
/// time come from the question text only.
ParsedQuery parse_question(const Question& q, const CorpusManifest& m, const Catalogs& catalogs,
                           const Lexicons& lexicons);

}  // namespace lvqa
