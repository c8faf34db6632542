#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>

#include "lvqa/cell_index.hpp"
#include "lvqa/lane_store.hpp"
#include "lvqa/query_parser.hpp"
#include "lvqa/retrieval.hpp"
#include "lvqa/temporal_kg.hpp"

namespace lvqa {

struct StoreConfig {
    std::size_t cell_budget = 6000;
    std::size_t bucket_budget = 3000;
    std::size_t embedding_dim = 256;
    Bm25Params bm25;
    double k_rrf = 60.0;
    bool resolve_speakers = true;
    GraphConfig graph;
};

/// Everything both pipelines read at answer time. Immutable after build.
struct CorpusStores {
    LaneDatabase db;
    Catalogs catalogs;
    Lexicons lexicons;
    std::shared_ptr<const Embedder> embedder;
    HybridIndex cells;
    HybridIndex buckets;
    TemporalGraph graph;
    HybridIndex observations;

    static CorpusStores build(const LaneDatabase& db, Catalogs catalogs, Lexicons lexicons,
                              const StoreConfig& config = {},
                              std::shared_ptr<const Embedder> embedder = nullptr);

    /// Reads a corpus directory (manifest, lanes, catalogs, lexicons).
    static CorpusStores load(const std::filesystem::path& dir, const StoreConfig& config = {});

    /// Writes docs, indexes and graph segments under `dir`.
    void persist(const std::filesystem::path& dir) const;
};

}  // namespace lvqa
