#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lvqa/cell_index.hpp"

namespace lvqa {

struct ScoredDoc {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Score desc, tie doc id asc; no duplicate ids.
struct RankedList {
    std::vector<ScoredDoc> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
    void sort();
    void truncate(std::size_t k);
    bool operator==(const RankedList&) const = default;
};

/// Restricts a search to ids for which it returns true.
using DocFilter = std::function<bool(std::string_view id)>;

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
};

/// Okapi BM25 over an inverted index.
class TextIndex {
public:
    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
        bool operator==(const Posting&) const = default;
    };

    TextIndex() = default;

    /// Throws DuplicateDocId.
    static TextIndex build(std::span<const std::pair<std::string, std::string>> docs,
                           Bm25Params params = {});
    static TextIndex build(std::span<const CellDocument> docs, Bm25Params params = {});

    /// Top-k by BM25; documents matching no query term are excluded.
    RankedList search(std::string_view query, std::size_t k, const DocFilter& filter = {}) const;

    std::size_t doc_count() const { return ids_.size(); }
    double avg_len() const { return avg_len_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return lengths_; }
    const std::unordered_map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    /// Term frequency of `term` in `id`; 0 when absent.
    std::uint32_t term_frequency(const std::string& term, const std::string& id) const;

    /// Header line, one line per doc, then one line per term (sorted).
    void save(const std::filesystem::path& path) const;
    static TextIndex load(const std::filesystem::path& path);

    bool operator==(const TextIndex&) const = default;

private:
    Bm25Params params_;
    std::vector<std::string> ids_;
    std::vector<std::uint32_t> lengths_;
    double avg_len_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> id_lookup_;
};

/// Embedding with a retrievability flag (empty text is not retrievable).
struct Embedding {
    std::vector<float> values;
    bool retrievable = false;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual Embedding embed(std::string_view text) const = 0;
};

/// Deterministic test embedder: content tokens hashed into `dim` counters,
/// then L2-normalised.
class HashedBowEmbedder final : public Embedder {
public:
    explicit HashedBowEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    Embedding embed(std::string_view text) const override;

private:
    std::size_t dim_;
};

/// OpenAI-compatible /v1/embeddings client. Throws GatewayError when unreachable.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string endpoint, std::string model, std::string api_key, std::size_t dim);
    std::size_t dim() const override { return dim_; }
    Embedding embed(std::string_view text) const override;

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
    std::size_t dim_;
};

/// Brute-force inner-product index over unit-norm vectors.
class DenseIndex {
public:
    explicit DenseIndex(std::size_t dim = 0) : dim_(dim) {}

    /// Non-retrievable embeddings are skipped. Throws DimensionMismatch, DuplicateDocId.
    void add(const std::string& id, const Embedding& e);

    /// Throws DimensionMismatch.
    RankedList search(std::span<const float> query, std::size_t k,
                      const DocFilter& filter = {}) const;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> vector(std::size_t row) const;

    /// `<base>.f32` rows of little-endian float32, `<base>.ids.json` sidecar.
    void save(const std::filesystem::path& base) const;
    static DenseIndex load(const std::filesystem::path& base);

    bool operator==(const DenseIndex&) const = default;

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<float> rows_;
};

/// score(d) = sum over lists containing d of 1/(k_rrf + rank_d), rank 1-based.
RankedList fuse_rrf(std::span<const RankedList> lists, double k_rrf = 60.0);

/// BM25 and dense indexes over one document set, fused with RRF.
class HybridIndex {
public:
    HybridIndex() = default;
    HybridIndex(std::span<const CellDocument> docs, std::shared_ptr<const Embedder> embedder,
                Bm25Params params = {}, double k_rrf = 60.0);

    /// Fuses every BM25 match with every positively-scored dense match.
    RankedList search(std::string_view query, std::size_t k, const DocFilter& filter = {}) const;

    const TextIndex& text() const { return text_; }
    const DenseIndex& dense() const { return dense_; }
    const Embedder& embedder() const { return *embedder_; }
    double k_rrf() const { return k_rrf_; }
    const std::vector<CellDocument>& documents() const { return docs_; }
    const CellDocument* find(const std::string& id) const;

private:
    TextIndex text_;
    DenseIndex dense_;
    std::shared_ptr<const Embedder> embedder_;
    double k_rrf_ = 60.0;
    std::vector<CellDocument> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Buckets of the first `top_cells` cells of `cell_ranking`, each scored by
/// the fused hybrid score of its own document.
RankedList score_buckets(const RankedList& cell_ranking, const HybridIndex& bucket_index,
                         std::string_view query, std::size_t top_cells);

}  // namespace lvqa
