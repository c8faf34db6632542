#include "lvqa/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "lvqa/errors.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

RankedList top_k(std::vector<ScoredDoc> docs, std::size_t k) {
    RankedList out{std::move(docs)};
    out.sort();
    out.truncate(k);
    return out;
}

void write_f32_le(std::ostream& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    out.write(bytes, 4);
}

float read_f32_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

}  // namespace

void RankedList::sort() { std::sort(entries.begin(), entries.end(), ranks_before); }

void RankedList::truncate(std::size_t k) {
    if (entries.size() > k) entries.resize(k);
}

// ---------------------------------------------------------------- BM25

TextIndex TextIndex::build(std::span<const std::pair<std::string, std::string>> docs,
                           Bm25Params params) {
    TextIndex idx;
    idx.params_ = params;
    std::uint64_t total = 0;
    for (const auto& [id, text] : docs) {
        if (idx.id_lookup_.contains(id)) throw DuplicateDocId("duplicate document id " + id);
        auto doc = static_cast<std::uint32_t>(idx.ids_.size());
        idx.id_lookup_.emplace(id, doc);
        idx.ids_.push_back(id);
        auto tokens = tokenize(text);
        idx.lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, n] : tf) idx.postings_[term].push_back({doc, n});
    }
    idx.avg_len_ = idx.ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(idx.ids_.size());
    return idx;
}

TextIndex TextIndex::build(std::span<const CellDocument> docs, Bm25Params params) {
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(docs.size());
    for (const auto& d : docs) pairs.emplace_back(key_string(d.key), d.text);
    return build(pairs, params);
}

RankedList TextIndex::search(std::string_view query, std::size_t k, const DocFilter& filter) const {
    auto tokens = tokenize(query);
    std::set<std::string> terms(tokens.begin(), tokens.end());
    const double n = static_cast<double>(ids_.size());
    std::map<std::uint32_t, double> acc;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = avg_len_ > 0.0 ? lengths_[p.doc] / avg_len_ : 0.0;
            acc[p.doc] += idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * (1.0 - params_.b + params_.b * norm));
        }
    }
    std::vector<ScoredDoc> hits;
    for (auto [doc, score] : acc) {
        if (filter && !filter(ids_[doc])) continue;
        hits.push_back({ids_[doc], score});
    }
    return top_k(std::move(hits), k);
}

std::uint32_t TextIndex::term_frequency(const std::string& term, const std::string& id) const {
    auto it = postings_.find(term);
    auto d = id_lookup_.find(id);
    if (it == postings_.end() || d == id_lookup_.end()) return 0;
    for (const auto& p : it->second) {
        if (p.doc == d->second) return p.tf;
    }
    return 0;
}

void TextIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << nlohmann::json{{"format", "bm25-postings"}, {"k1", params_.k1}, {"b", params_.b},
                          {"doc_count", ids_.size()}, {"avg_len", avg_len_}}
               .dump()
        << '\n';
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        out << nlohmann::json{{"doc", ids_[i]}, {"len", lengths_[i]}}.dump() << '\n';
    }
    std::vector<std::string> terms;
    terms.reserve(postings_.size());
    for (const auto& [t, _] : postings_) terms.push_back(t);
    std::sort(terms.begin(), terms.end());
    for (const auto& t : terms) {
        auto list = nlohmann::json::array();
        for (const auto& p : postings_.at(t)) list.push_back({p.doc, p.tf});
        out << nlohmann::json{{"term", t}, {"postings", list}}.dump() << '\n';
    }
}

TextIndex TextIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    TextIndex idx;
    std::string line;
    std::size_t n = 0;
    try {
        if (!std::getline(in, line)) throw ParseError("empty index file");
        ++n;
        auto header = nlohmann::json::parse(line);
        idx.params_ = {header.at("k1").get<double>(), header.at("b").get<double>()};
        idx.avg_len_ = header.at("avg_len").get<double>();
        auto docs = header.at("doc_count").get<std::size_t>();
        for (std::size_t i = 0; i < docs; ++i) {
            if (!std::getline(in, line)) throw ParseError("truncated document table", n);
            ++n;
            auto d = nlohmann::json::parse(line);
            idx.id_lookup_.emplace(d.at("doc").get<std::string>(), static_cast<std::uint32_t>(i));
            idx.ids_.push_back(d.at("doc").get<std::string>());
            idx.lengths_.push_back(d.at("len").get<std::uint32_t>());
        }
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            auto t = nlohmann::json::parse(line);
            auto& list = idx.postings_[t.at("term").get<std::string>()];
            for (const auto& p : t.at("postings")) {
                auto doc = p.at(0).get<std::uint32_t>();
                if (doc >= docs) throw ParseError("posting references unknown document", n);
                list.push_back({doc, p.at(1).get<std::uint32_t>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what(), n);
    }
    return idx;
}

// ---------------------------------------------------------------- dense

Embedding HashedBowEmbedder::embed(std::string_view text) const {
    Embedding e;
    e.values.assign(dim_, 0.0F);
    double acc_norm = 0.0;
    std::vector<double> acc(dim_, 0.0);
    for (const auto& t : content_tokens(text)) acc[fnv1a64(t) % dim_] += 1.0;
    for (double v : acc) acc_norm += v * v;
    if (acc_norm == 0.0) return e;
    double inv = 1.0 / std::sqrt(acc_norm);
    for (std::size_t i = 0; i < dim_; ++i) e.values[i] = static_cast<float>(acc[i] * inv);
    e.retrievable = true;
    return e;
}

void DenseIndex::add(const std::string& id, const Embedding& e) {
    if (!e.retrievable) return;
    if (e.values.size() != dim_) {
        throw DimensionMismatch("embedding has dim " + std::to_string(e.values.size()) + ", index " +
                                std::to_string(dim_));
    }
    if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
        throw DuplicateDocId("duplicate document id " + id);
    }
    ids_.push_back(id);
    rows_.insert(rows_.end(), e.values.begin(), e.values.end());
}

std::span<const float> DenseIndex::vector(std::size_t row) const {
    return std::span<const float>(rows_).subspan(row * dim_, dim_);
}

RankedList DenseIndex::search(std::span<const float> query, std::size_t k,
                              const DocFilter& filter) const {
    if (query.size() != dim_) {
        throw DimensionMismatch("query has dim " + std::to_string(query.size()) + ", index " +
                                std::to_string(dim_));
    }
    std::vector<ScoredDoc> hits;
    hits.reserve(ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r) {
        if (filter && !filter(ids_[r])) continue;
        auto row = vector(r);
        double dot = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) dot += static_cast<double>(row[i]) * static_cast<double>(query[i]);
        hits.push_back({ids_[r], dot});
    }
    return top_k(std::move(hits), k);
}

void DenseIndex::save(const std::filesystem::path& base) const {
    auto rows_path = base;
    rows_path += ".f32";
    auto ids_path = base;
    ids_path += ".ids.json";
    std::ofstream out(rows_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + rows_path.string());
    for (float v : rows_) write_f32_le(out, v);
    std::ofstream ids(ids_path);
    if (!ids) throw IoError("cannot write " + ids_path.string());
    ids << nlohmann::json{{"dim", dim_}, {"ids", ids_}}.dump() << '\n';
}

DenseIndex DenseIndex::load(const std::filesystem::path& base) {
    auto rows_path = base;
    rows_path += ".f32";
    auto ids_path = base;
    ids_path += ".ids.json";
    std::ifstream ids(ids_path);
    if (!ids) throw IoError("cannot open " + ids_path.string());
    nlohmann::json sidecar;
    try {
        ids >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }
    DenseIndex idx(sidecar.at("dim").get<std::size_t>());
    idx.ids_ = sidecar.at("ids").get<std::vector<std::string>>();
    std::ifstream in(rows_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + rows_path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != idx.ids_.size() * idx.dim_ * 4) {
        throw ParseError("dense rows do not match the id sidecar");
    }
    idx.rows_.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < idx.rows_.size(); ++i) idx.rows_[i] = read_f32_le(&bytes[i * 4]);
    return idx;
}

// ---------------------------------------------------------------- fusion

RankedList fuse_rrf(std::span<const RankedList> lists, double k_rrf) {
    // Ranks are summed best-first so the total, and hence tie-breaking, does
    // not depend on the order of the input lists.
    std::map<std::string, std::vector<std::size_t>> ranks;
    for (const auto& list : lists) {
        for (std::size_t i = 0; i < list.entries.size(); ++i) ranks[list.entries[i].id].push_back(i + 1);
    }
    std::vector<ScoredDoc> fused;
    fused.reserve(ranks.size());
    for (auto& [id, rs] : ranks) {
        std::sort(rs.begin(), rs.end());
        double s = 0.0;
        for (auto r : rs) s += 1.0 / (k_rrf + static_cast<double>(r));
        fused.push_back({id, s});
    }
    RankedList out{std::move(fused)};
    out.sort();
    return out;
}

HybridIndex::HybridIndex(std::span<const CellDocument> docs, std::shared_ptr<const Embedder> embedder,
                         Bm25Params params, double k_rrf)
    : text_(TextIndex::build(docs, params)),
      dense_(embedder->dim()),
      embedder_(std::move(embedder)),
      k_rrf_(k_rrf),
      docs_(docs.begin(), docs.end()) {
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        auto id = key_string(docs_[i].key);
        by_id_.emplace(id, i);
        dense_.add(id, embedder_->embed(docs_[i].text));
    }
}

RankedList HybridIndex::search(std::string_view query, std::size_t k, const DocFilter& filter) const {
    if (!embedder_) return {};
    auto lexical = text_.search(query, text_.doc_count(), filter);
    RankedList semantic;
    auto q = embedder_->embed(query);
    if (q.retrievable) {
        semantic = dense_.search(q.values, dense_.size(), filter);
        std::erase_if(semantic.entries, [](const ScoredDoc& d) { return d.score <= 0.0; });
    }
    const RankedList lists[] = {lexical, semantic};
    auto fused = fuse_rrf(lists, k_rrf_);
    fused.truncate(k);
    return fused;
}

const CellDocument* HybridIndex::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

RankedList score_buckets(const RankedList& cell_ranking, const HybridIndex& bucket_index,
                         std::string_view query, std::size_t top_cells) {
    std::set<CellKey> cells;
    for (std::size_t i = 0; i < cell_ranking.size() && i < top_cells; ++i) {
        auto key = parse_key(cell_ranking.entries[i].id);
        if (key && std::holds_alternative<CellKey>(*key)) cells.insert(std::get<CellKey>(*key));
    }
    if (cells.empty()) return {};
    DocFilter in_cells = [&cells](std::string_view id) {
        auto key = parse_key(id);
        return key && std::holds_alternative<BucketKey>(*key) && cells.contains(std::get<BucketKey>(*key).cell);
    };
    return bucket_index.search(query, bucket_index.documents().size(), in_cells);
}

}  // namespace lvqa
