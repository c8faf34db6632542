#include "lvqa/stores.hpp"

#include "lvqa/errors.hpp"

namespace lvqa {

CorpusStores CorpusStores::build(const LaneDatabase& db, Catalogs catalogs, Lexicons lexicons,
                                 const StoreConfig& config, std::shared_ptr<const Embedder> embedder) {
    CorpusStores s;
    if (config.resolve_speakers) {
        std::map<Lane, std::vector<LaneRecord>> lanes;
        for (Lane l : kAllLanes) lanes[l] = db.lane(l);
        lanes[Lane::transcript] =
            resolve_speakers_consensus(db.lane(Lane::transcript), db.lane(Lane::identity), db.manifest());
        s.db = LaneDatabase(db.manifest(), std::move(lanes));
    } else {
        s.db = db;
    }
    s.catalogs = std::move(catalogs);
    s.lexicons = std::move(lexicons);
    s.embedder = embedder ? std::move(embedder) : std::make_shared<HashedBowEmbedder>(config.embedding_dim);

    const auto& m = s.db.manifest();
    auto cell_docs = build_documents(s.db.all(), m, Granularity::cell, config.cell_budget);
    auto bucket_docs = build_documents(s.db.all(), m, Granularity::bucket, config.bucket_budget);
    s.cells = HybridIndex(cell_docs, s.embedder, config.bm25, config.k_rrf);
    s.buckets = HybridIndex(bucket_docs, s.embedder, config.bm25, config.k_rrf);
    s.graph = TemporalGraph::build(s.db, s.catalogs.places, config.graph);
    s.observations = HybridIndex(s.graph.observation_documents(), s.embedder, config.bm25, config.k_rrf);
    return s;
}

CorpusStores CorpusStores::load(const std::filesystem::path& dir, const StoreConfig& config) {
    auto db = LaneDatabase::load(dir);
    auto catalogs = std::filesystem::exists(dir / "persons.json")
                        ? Catalogs::load(dir)
                        : Catalogs::from_manifest(db.manifest(), {}, {});
    auto lexicons = std::filesystem::exists(dir / "lexicons.json") ? Lexicons::load(dir / "lexicons.json")
                                                                   : Lexicons::defaults();
    return build(db, std::move(catalogs), std::move(lexicons), config);
}

void CorpusStores::persist(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir / "index");
    save_documents(cells.documents(), dir / "index" / "cell.docs.jsonl");
    save_documents(buckets.documents(), dir / "index" / "bucket.docs.jsonl");
    save_documents(observations.documents(), dir / "index" / "observation.docs.jsonl");
    cells.text().save(dir / "index" / "cell.bm25.jsonl");
    buckets.text().save(dir / "index" / "bucket.bm25.jsonl");
    observations.text().save(dir / "index" / "observation.bm25.jsonl");
    cells.dense().save(dir / "index" / "cell");
    buckets.dense().save(dir / "index" / "bucket");
    observations.dense().save(dir / "index" / "observation");
    for (const auto& seg : graph.segments()) persist_segment(seg, dir / "kg");
}

}  // namespace lvqa
