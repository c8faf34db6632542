#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvqa/answer.hpp"
#include "lvqa/lane_store.hpp"
#include "lvqa/model_gateway.hpp"
#include "lvqa/query_parser.hpp"

namespace lvqa {

struct SyntheticConfig {
    int days = 4;
    Seconds day_start = 9 * kHourSeconds;
    Seconds day_end = 11 * kHourSeconds;
    int ego_cameras = 3;
    int exo_cameras = 3;
    int persons = 6;
    /// Fraction of interior slots hosting a happening (0 = empty corpus).
    double density = 0.5;
    int embedding_dim = 16;

    void validate() const;  // throws ConfigError
};

struct Activity {
    std::string stem;    // lexicon verb, e.g. "chop"
    std::string gerund;  // "chopping"
    std::string object;  // detection label, e.g. "carrot"
    std::string plural;  // "carrots"
};

/// One scripted happening; every lane record it produces traces back to it.
struct Happening {
    std::string id;
    int day = 1;
    int slot = 0;
    std::string place;
    PersonId actor;
    std::vector<PersonId> co_actors;
    Activity activity;
    int count = 1;
    std::vector<std::string> regions;  // one per counted object
    std::string utterance;
    std::optional<std::string> screen_text;
    std::vector<CameraId> visible;

    TimeWindow window() const;
    std::vector<PersonId> participants() const;
};

struct QuestionTarget {
    std::string happening;  // the happening the gold answer is about
    Intent intent = Intent::other;
};

struct GroundTruthScript {
    std::uint64_t seed = 0;
    SyntheticConfig config;
    std::vector<Happening> happenings;
    std::map<PersonId, std::string> names;
    std::map<std::string, CameraId> place_cameras;  // exo camera watching each place
    std::map<std::string, QuestionTarget> targets;   // question id -> target

    const Happening* find(const std::string& id) const;
    const Happening* target_of(const std::string& question_id) const;
    /// Verbatim texts a happening contributed to the lanes.
    std::vector<std::string> signatures(const Happening& h) const;
    /// Whether `text` contains any signature of `h`.
    bool mentions(const Happening& h, std::string_view text) const;
    std::string descriptor(const Happening& h) const;

    nlohmann::json to_json() const;
    static GroundTruthScript from_json(const nlohmann::json& j);
};

struct SyntheticCorpus {
    LaneDatabase db;
    Catalogs catalogs;
    Lexicons lexicons;
    GroundTruthScript script;

    /// manifest.json, lanes/, catalogs, lexicons.json, script.json.
    void write(const std::filesystem::path& dir) const;
};

/// Deterministic in (seed, config). Throws ConfigError.
SyntheticCorpus generate_corpus(std::uint64_t seed, const SyntheticConfig& config = {});

/// Relative weights per intent.
using IntentMix = std::map<Intent, double>;
IntentMix default_intent_mix();

/// Questions with gold labels; records each question's target in `script`.
/// Throws InsufficientEvents.
std::vector<Question> generate_questions(GroundTruthScript& script, std::size_t n,
                                         const IntentMix& mix = default_intent_mix());

enum class Injection { none, echo, assert_on_empty, ungrounded_count };

std::string to_string(Injection i);

struct OracleOptions {
    /// Probability that a reply about a non-target window is flipped.
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
    Injection injection = Injection::none;
};

/// Scripted channel answering from ground truth.
class OracleChannel final : public Channel {
public:
    OracleChannel(const GroundTruthScript& script, std::span<const Question> questions,
                  OracleOptions options = {});

    std::string id() const override { return "oracle"; }
    std::string complete(const ModelRequest& req) override;

    nlohmann::json reply_verify(const ModelRequest& req) const;

private:
    nlohmann::json reply_rerank(const ModelRequest& req, const Happening* target) const;
    nlohmann::json reply_final(const ModelRequest& req, const Happening* target,
                               const Question* q) const;
    nlohmann::json reply_judge(const ModelRequest& req, const Happening* target,
                               const Question* q) const;
    nlohmann::json reply_tmkg(const ModelRequest& req, const Happening* target,
                              const Question* q) const;
    nlohmann::json reply_prior(const ModelRequest& req, const Happening* target,
                               const Question* q) const;
    bool noisy(const std::string& question_id, const std::string& window) const;
    std::string wrong_label(const Question& q, const std::string& salt) const;

    const GroundTruthScript& script_;
    std::map<std::string, Question> questions_;
    OracleOptions options_;
};

struct EvalReport {
    double accuracy = 0.0;
    int total = 0;
    int correct = 0;
    std::map<std::string, double> per_intent;
    std::map<std::string, double> mean_ledger;  // per pipeline
    std::map<std::string, int> failure_tags;

    nlohmann::json to_json() const;
};

/// Accuracy over all questions plus breakdowns. Throws IdMismatch.
EvalReport evaluate(std::span<const AnswerRecord> answers, std::span<const Question> questions,
                    const GroundTruthScript* script = nullptr);

}  // namespace lvqa
