#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lvqa/config.hpp"
#include "lvqa/errors.hpp"

using namespace lvqa;
using namespace lvqa::testing;

namespace {

EngineConfig load_text(const std::string& body) {
    TempDir dir;
    write_file(dir / "engine.ini", body);
    return load_config(dir / "engine.ini");
}

}  // namespace

TEST(Config, ShippedDefaultsMatchCompiledDefaults) {
    auto c = load_config(std::filesystem::path(LVQA_DATA_DIR) / "default.ini");
    EngineConfig d;
    EXPECT_EQ(c.store.bm25, d.store.bm25);
    EXPECT_EQ(c.store.k_rrf, d.store.k_rrf);
    EXPECT_EQ(c.store.embedding_dim, d.store.embedding_dim);
    EXPECT_EQ(c.store.graph.merge.person_jaccard, d.store.graph.merge.person_jaccard);
    EXPECT_EQ(c.store.graph.link.object_floor, d.store.graph.link.object_floor);
    EXPECT_EQ(c.sva.verify_cameras, d.sva.verify_cameras);
    EXPECT_EQ(c.sva.span_after, d.sva.span_after);
    EXPECT_EQ(c.tmkg.tau_score, d.tmkg.tau_score);
    EXPECT_EQ(c.tmkg.bonuses.person, d.tmkg.bonuses.person);
    EXPECT_EQ(c.gateway.retries, d.gateway.retries);
    EXPECT_EQ(c.gateway.backoff, d.gateway.backoff);
    EXPECT_EQ(c.gateway.max_in_flight, d.gateway.max_in_flight);
}

TEST(Config, PartialFileOverridesOnlyGivenKeys) {
    auto c = load_text("[tmkg]\ntau_margin = 0.35\nk = 5\n[gateway]\nretries = 1\nbackoff_ms = 10\n");
    EXPECT_DOUBLE_EQ(c.tmkg.tau_margin, 0.35);
    EXPECT_EQ(c.tmkg.k, 5u);
    EXPECT_EQ(c.gateway.retries, 1);
    EXPECT_EQ(c.gateway.backoff, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(10)}));
    EXPECT_DOUBLE_EQ(c.tmkg.tau_score, TmkgConfig{}.tau_score);
    EXPECT_EQ(c.sva.keep_cells, SvaConfig{}.keep_cells);
}

TEST(Config, Errors) {
    EXPECT_THROW(load_config("/nonexistent/engine.ini"), ConfigError);
    EXPECT_THROW(load_text("[mystery]\nx = 1\n"), ConfigError);
    EXPECT_THROW(load_text("[tmkg]\ntau = 1\n"), ConfigError);
    EXPECT_THROW(load_text("[tmkg]\nk = three\n"), ConfigError);
    EXPECT_THROW(load_text("[retrieval]\nb = 1.5\n"), ConfigError);
    EXPECT_THROW(load_text("[sva]\nretrieve_cells = 2\nkeep_cells = 3\n"), ConfigError);
    EXPECT_THROW(load_text("[gateway]\nbackoff_ms = 10,x\n"), ConfigError);
    EXPECT_THROW(load_text("[gateway]\nretries = 3\nbackoff_ms = 10\n"), ConfigError);
    EXPECT_THROW(load_text("[tmkg]\ntau_margin = 1.2\n"), ConfigError);
}
