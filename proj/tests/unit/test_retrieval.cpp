#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "lvqa/errors.hpp"
#include "lvqa/retrieval.hpp"
#include "lvqa/text.hpp"

using namespace lvqa;
using namespace lvqa::testing;

namespace {

using Docs = std::vector<std::pair<std::string, std::string>>;

const Docs kThree = {{"d1", "mug on the kitchen table"}, {"d2", "kitchen kitchen sink"}, {"d3", "a mug a mug in the garden"}};

double bm25(const Docs& docs, const std::string& id, const std::vector<std::string>& query, double k1 = 1.2, double b = 0.75) {
    std::map<std::string, std::vector<std::string>> toks;
    double total = 0;
    for (const auto& [d, t] : docs) {
        toks[d] = tokenize(t);
        total += toks[d].size();
    }
    double n = docs.size(), avg = total / n, score = 0;
    for (const auto& q : std::set<std::string>(query.begin(), query.end())) {
        double df = 0;
        for (const auto& [_, t] : toks) df += std::count(t.begin(), t.end(), q) > 0;
        double tf = std::count(toks[id].begin(), toks[id].end(), q);
        if (tf == 0) continue;
        double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * toks[id].size() / avg));
    }
    return score;
}

Embedding unit(std::vector<float> v) {
    double n = 0;
    for (float x : v) n += x * x;
    for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
    return {v, true};
}

}  // namespace

TEST(Tokenize, Examples) {
    EXPECT_EQ(tokenize("Alice's 3 mugs"), (std::vector<std::string>{"alice", "s", "3", "mugs"}));
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_EQ(tokenize("Día-4"), (std::vector<std::string>{"día", "4"}));
    EXPECT_EQ(tokenize("ÉCOLE Straße"), (std::vector<std::string>{"école", "straße"}));
}

TEST(TextIndex, SingleDoc) {
    Docs one = {{"only", "three word doc"}};
    auto idx = TextIndex::build(one);
    EXPECT_EQ(idx.doc_count(), 1u);
    EXPECT_DOUBLE_EQ(idx.avg_len(), 3.0);
    auto r = idx.search("word", 5);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r.entries[0].id, "only");
    EXPECT_GT(r.entries[0].score, 0.0);
}

TEST(TextIndex, EmptyTextNeverRetrieved) {
    Docs docs = {{"a", ""}, {"b", "mug"}};
    auto idx = TextIndex::build(docs);
    EXPECT_EQ(idx.doc_lengths()[0], 0u);
    auto r = idx.search("mug", 5);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r.entries[0].id, "b");
}

TEST(TextIndex, PostingsMatchNaiveCounts) {
    auto idx = TextIndex::build(kThree);
    for (const auto& [id, text] : kThree) {
        auto toks = tokenize(text);
        for (const auto& t : toks) {
            EXPECT_EQ(idx.term_frequency(t, id), static_cast<std::uint32_t>(std::count(toks.begin(), toks.end(), t)));
        }
    }
    EXPECT_EQ(idx.term_frequency("kitchen", "d2"), 2u);
    EXPECT_EQ(idx.term_frequency("mug", "d2"), 0u);
    EXPECT_EQ(idx.postings().at("mug").size(), 2u);
}

TEST(TextIndex, DuplicateIdRejected) {
    Docs docs = {{"a", "x"}, {"a", "y"}};
    EXPECT_THROW(TextIndex::build(docs), DuplicateDocId);
}

TEST(TextIndex, AbsentTermEmpty) { EXPECT_TRUE(TextIndex::build(kThree).search("zebra", 5).empty()); }

TEST(TextIndex, MugKitchenMatchesFormula) {
    auto idx = TextIndex::build(kThree);
    auto r = idx.search("mug kitchen", 5);
    ASSERT_EQ(r.size(), 3u);
    std::vector<std::pair<double, std::string>> expect;
    for (const auto& [id, _] : kThree) expect.push_back({-bm25(kThree, id, {"mug", "kitchen"}), id});
    std::sort(expect.begin(), expect.end());
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(r.entries[i].id, expect[i].second);
        EXPECT_NEAR(r.entries[i].score, -expect[i].first, 1e-12);
    }
}

TEST(TextIndex, ScoresNonNegativeAndTfStableUnderGrowth) {
    Docs docs = kThree;
    auto before = TextIndex::build(docs);
    docs.push_back({"d4", "mug mug mug mug kitchen"});
    auto after = TextIndex::build(docs);
    for (const auto& [id, text] : kThree) {
        for (const auto& t : tokenize(text)) EXPECT_EQ(before.term_frequency(t, id), after.term_frequency(t, id));
    }
    // "the" is in 2 of 3 docs: the non-negative IDF keeps it >= 0.
    for (const auto& e : after.search("the mug a kitchen", 10).entries) EXPECT_GE(e.score, 0.0);
    for (const auto& e : after.search("mug", 10).entries) EXPECT_NEAR(e.score, bm25(docs, e.id, {"mug"}), 1e-12);
}

TEST(TextIndex, PersistRoundTrip) {
    TempDir dir;
    auto idx = TextIndex::build(kThree, {0.9, 0.4});
    idx.save(dir / "t.bm25.jsonl");
    auto back = TextIndex::load(dir / "t.bm25.jsonl");
    EXPECT_EQ(back, idx);
    EXPECT_EQ(back.search("mug kitchen", 3), idx.search("mug kitchen", 3));
}

TEST(Embedder, Properties) {
    HashedBowEmbedder e(64);
    auto a = e.embed("Alice washes two mugs");
    EXPECT_TRUE(a.retrievable);
    EXPECT_EQ(a.values, e.embed("Alice washes two mugs").values);
    EXPECT_EQ(a.values, e.embed("mugs two washes Alice").values);
    double n = 0;
    for (float x : a.values) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-6);
    auto empty = e.embed("");
    EXPECT_FALSE(empty.retrievable);
    EXPECT_EQ(HashedBowEmbedder().dim(), 256u);
}

TEST(DenseIndex, SelfMatchAndOrthogonal) {
    DenseIndex idx(3);
    idx.add("x", unit({1, 0, 0}));
    idx.add("y", unit({0, 1, 0}));
    auto r = idx.search(unit({1, 0, 0}).values, 2);
    EXPECT_EQ(r.entries[0].id, "x");
    EXPECT_DOUBLE_EQ(r.entries[0].score, 1.0);
    EXPECT_DOUBLE_EQ(r.entries[1].score, 0.0);
}

TEST(DenseIndex, FiveVectorsMatchScan) {
    DenseIndex idx(3);
    std::vector<std::pair<std::string, Embedding>> rows = {{"a", unit({1, 2, 3})}, {"b", unit({3, 2, 1})}, {"c", unit({0, 1, 0})},
                                                           {"d", unit({-1, 0, 1})}, {"e", unit({1, 1, 1})}};
    for (const auto& [id, v] : rows) idx.add(id, v);
    auto q = unit({2, 1, 0});
    std::vector<ScoredDoc> expect;
    for (const auto& [id, v] : rows) {
        double dot = 0;
        for (int i = 0; i < 3; ++i) dot += static_cast<double>(v.values[i]) * q.values[i];
        expect.push_back({id, dot});
    }
    std::sort(expect.begin(), expect.end(), [](auto& x, auto& y) { return x.score != y.score ? x.score > y.score : x.id < y.id; });
    EXPECT_EQ(idx.search(q.values, 5).entries, expect);
}

TEST(DenseIndex, Errors) {
    DenseIndex idx(3);
    EXPECT_THROW(idx.add("x", Embedding{{1, 0}, true}), DimensionMismatch);
    idx.add("x", unit({1, 0, 0}));
    EXPECT_THROW(idx.add("x", unit({0, 1, 0})), DuplicateDocId);
    std::vector<float> q = {1, 0};
    EXPECT_THROW(idx.search(q, 1), DimensionMismatch);
    idx.add("skip", Embedding{{0, 0, 0}, false});
    EXPECT_EQ(idx.size(), 1u);
}

TEST(DenseIndex, PersistRoundTrip) {
    TempDir dir;
    DenseIndex idx(3);
    idx.add("a", unit({1, 2, 3}));
    idx.add("b", unit({0.1f, -2, 3}));
    idx.save(dir / "dense");
    EXPECT_EQ(read_file(dir / "dense.f32").size(), 2u * 3u * 4u);
    EXPECT_EQ(DenseIndex::load(dir / "dense"), idx);
}

TEST(Rrf, OneListKeepsOrder) {
    RankedList l{{{"b", 9}, {"a", 5}, {"c", 1}}};
    std::vector<RankedList> ls = {l};
    auto f = fuse_rrf(ls);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f.entries[0].id, "b");
    EXPECT_EQ(f.entries[2].id, "c");
}

TEST(Rrf, TopOfBothIsTwoOverSixtyOne) {
    std::vector<RankedList> ls = {RankedList{{{"x", 1}, {"y", 0.5}}}, RankedList{{{"x", 3}, {"z", 2}}}};
    auto f = fuse_rrf(ls, 60);
    EXPECT_EQ(f.entries[0].id, "x");
    EXPECT_NEAR(f.entries[0].score, 2.0 / 61.0, 1e-15);
}

TEST(Rrf, SingleListDocNeverBeatsDoubleTop) {
    for (std::size_t len = 1; len < 30; ++len) {
        RankedList a, b;
        a.entries.push_back({"both", 1});
        b.entries.push_back({"both", 1});
        for (std::size_t i = 0; i < len; ++i) a.entries.push_back({"one" + std::to_string(i), 0});
        std::vector<RankedList> ls = {a, b};
        EXPECT_EQ(fuse_rrf(ls).entries.front().id, "both");
    }
}

TEST(Rrf, MonotoneAndPermutationInvariant) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RankedList> ls(3);
        for (auto& l : ls) {
            std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f"};
            std::shuffle(ids.begin(), ids.end(), rng);
            for (std::size_t i = 0; i < 4; ++i) l.entries.push_back({ids[i], 0});
        }
        auto base = fuse_rrf(ls);
        auto perm = ls;
        std::shuffle(perm.begin(), perm.end(), rng);
        EXPECT_EQ(fuse_rrf(perm), base);
        // Move the last entry of list 0 up one rank.
        auto improved = ls;
        std::swap(improved[0].entries[2], improved[0].entries[3]);
        auto moved = improved[0].entries[2].id;
        auto score = [](const RankedList& r, const std::string& id) {
            for (const auto& e : r.entries) {
                if (e.id == id) return e.score;
            }
            return 0.0;
        };
        EXPECT_GE(score(fuse_rrf(improved), moved), score(base, moved));
    }
}

namespace {

std::vector<CellDocument> bucket_docs() {
    std::vector<CellDocument> docs;
    const std::vector<std::string> texts = {"kettle boils", "", "mug of tea", "kettle and mug", "", "garden chairs", "mug", "books"};
    for (int i = 0; i < 8; ++i) docs.push_back({BucketKey{{1, 9 + i / 4}, i % 4}, texts[i], {}});
    return docs;
}

}  // namespace

TEST(ScoreBuckets, SingleCellSingleBucket) {
    std::vector<CellDocument> docs = {{BucketKey{{1, 9}, 0}, "", {}}, {BucketKey{{1, 9}, 2}, "mug on a shelf", {}}};
    HybridIndex idx(docs, std::make_shared<HashedBowEmbedder>(32));
    RankedList cells{{{"cell:1:9", 1.0}}};
    auto r = score_buckets(cells, idx, "mug", 1);
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r.entries[0].id, "bucket:1:9:2");
}

TEST(ScoreBuckets, AllEmptyGivesNothing) {
    std::vector<CellDocument> docs = {{BucketKey{{1, 9}, 0}, "", {}}, {BucketKey{{1, 9}, 1}, "", {}}};
    HybridIndex idx(docs, std::make_shared<HashedBowEmbedder>(32));
    EXPECT_TRUE(score_buckets(RankedList{{{"cell:1:9", 1.0}}}, idx, "mug", 1).empty());
}

TEST(ScoreBuckets, MatchesExhaustiveScoring) {
    auto docs = bucket_docs();
    HybridIndex idx(docs, std::make_shared<HashedBowEmbedder>(32));
    RankedList cells{{{"cell:1:10", 0.9}, {"cell:1:9", 0.5}}};
    for (std::size_t top : {1u, 2u}) {
        auto got = score_buckets(cells, idx, "kettle mug", top);
        // Brute force: fused hybrid score of every bucket doc, then restrict to the top cells.
        auto all = idx.search("kettle mug", docs.size());
        std::set<std::string> allowed;
        for (std::size_t c = 0; c < top; ++c) allowed.insert(cells.entries[c].id);
        RankedList expect;
        for (const auto& e : all.entries) {
            auto key = std::get<BucketKey>(*parse_key(e.id));
            if (allowed.contains(key_string(key.cell))) expect.entries.push_back(e);
        }
        expect.sort();
        EXPECT_EQ(got.entries.size(), expect.entries.size());
        for (std::size_t i = 0; i < std::min(got.size(), expect.size()); ++i) {
            EXPECT_EQ(got.entries[i].id, expect.entries[i].id);
        }
    }
}

TEST(Hybrid, FusesBothSides) {
    auto docs = bucket_docs();
    auto emb = std::make_shared<HashedBowEmbedder>(32);
    HybridIndex idx(docs, emb);
    auto r = idx.search("mug", 10);
    ASSERT_FALSE(r.empty());
    auto bm = idx.text().search("mug", 10);
    auto dense = idx.dense().search(emb->embed("mug").values, 10);
    RankedList positive;
    for (const auto& e : dense.entries) {
        if (e.score > 0) positive.entries.push_back(e);
    }
    std::vector<RankedList> both = {bm, positive};
    EXPECT_EQ(r, fuse_rrf(both, 60));
}
