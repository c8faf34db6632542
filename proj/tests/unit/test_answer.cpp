#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lvqa/answer.hpp"
#include "lvqa/errors.hpp"

using namespace lvqa;
using namespace lvqa::testing;

namespace {

Question colours() {
    Question q;
    q.id = "q3";
    q.text = "Which colour was the kettle?";
    q.choices = {{"A", "red kettle"}, {"B", "blue kettle"}, {"C", "green teapot"}, {"D", "yellow cup"}};
    return q;
}

}  // namespace

TEST(Overlap, WeightedFractionOfChoiceTokens) {
    std::vector<WeightedText> texts = {{"the blue kettle boiled", 2.0}, {"a green teapot", 1.0}};
    auto pick = overlap_choice(colours(), texts);
    ASSERT_EQ(pick.scores.size(), 4u);
    // A: kettle in text 1 (1/2 * 2); B: both tokens in text 1 (2/2 * 2); C: both in text 2 (1); D: none.
    EXPECT_DOUBLE_EQ(pick.scores[0], 1.0);
    EXPECT_DOUBLE_EQ(pick.scores[1], 2.0);
    EXPECT_DOUBLE_EQ(pick.scores[2], 1.0);
    EXPECT_DOUBLE_EQ(pick.scores[3], 0.0);
    EXPECT_EQ(pick.label, "B");
    EXPECT_DOUBLE_EQ(pick.confidence, 0.5);
}

TEST(Overlap, TiesAndDefaults) {
    std::vector<WeightedText> tie = {{"kettle", 1.0}};
    EXPECT_EQ(overlap_choice(colours(), tie).label, "A");
    EXPECT_EQ(overlap_choice(colours(), tie, std::string("B")).label, "B");
    EXPECT_EQ(overlap_choice(colours(), tie, std::string("C")).label, "A");  // C is not among the best
    EXPECT_EQ(overlap_choice(colours(), {}).label, "A");
    EXPECT_DOUBLE_EQ(overlap_choice(colours(), {}).confidence, 0.0);
    EXPECT_EQ(overlap_choice(colours(), {}, std::string("D")).label, "D");
}

TEST(AnswerRecord, JsonlRoundTrip) {
    TempDir dir;
    AnswerRecord a;
    a.question_id = "q1";
    a.choice = "C";
    a.confidence = 0.25;
    a.supporting_views = {{"exo1", "bucket:1:9:2"}};
    a.rationale = "because";
    a.ledger_total = 28;
    a.pipeline = "sva";
    a.diagnostics.windows = {"bucket:1:9:2"};
    a.diagnostics.fallback_used = true;
    a.diagnostics.verify_calls = 24;
    AnswerRecord b;
    b.question_id = "q2";
    b.choice = "A";
    b.pipeline = "tmkg";
    std::vector<AnswerRecord> all = {a, b};
    save_answers(all, dir / "answers.jsonl");
    EXPECT_EQ(load_answers(dir / "answers.jsonl"), all);
    EXPECT_EQ(answer_from_json(to_json(a)), a);
}

TEST(AnswerRecord, InvalidChoiceRejected) {
    auto j = to_json(AnswerRecord{"q1", "A"});
    j["choice"] = "E";
    EXPECT_THROW(answer_from_json(j), Error);
}
