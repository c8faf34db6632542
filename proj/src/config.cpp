#include "lvqa/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <map>
#include <set>
#include <sstream>

#include "lvqa/errors.hpp"

namespace lvqa {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> kKeys = {
        {"retrieval",
         {"k1", "b", "k_rrf", "embedding_dim", "cell_budget", "bucket_budget", "resolve_speakers", "tag_count",
          "summary_budget", "person_jaccard", "tag_jaccard", "object_floor"}},
        {"sva",
         {"retrieve_cells", "keep_cells", "bucket_candidates", "verify_cameras", "span_before", "span_after",
          "excerpt_chars"}},
        {"tmkg", {"tau_score", "tau_margin", "k", "bonus_person", "bonus_place", "bonus_object",
                  "bonus_before_normalisation"}},
        {"gateway", {"retries", "backoff_ms", "max_in_flight"}},
    };
    return kKeys;
}

template <typename T>
void read(const pt::ptree& section, const std::string& name, const std::string& key, T& target) {
    auto value = section.get_optional<std::string>(key);
    if (!value) return;
    auto parsed = section.get_optional<T>(key);
    if (!parsed) throw ConfigError("[" + name + "] " + key + ": cannot parse '" + *value + "'");
    target = *parsed;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

std::vector<std::chrono::milliseconds> parse_backoff(const std::string& text) {
    std::vector<std::chrono::milliseconds> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            long ms = std::stol(item, &used);
            require(ms >= 0 && item.find_first_not_of(" \t", used) == std::string::npos, "");
            out.emplace_back(ms);
        } catch (const std::exception&) {
            throw ConfigError("[gateway] backoff_ms: expected comma-separated non-negative integers, got '" + text + "'");
        }
    }
    return out;
}

}  // namespace

EngineConfig load_config(const std::filesystem::path& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }

    for (const auto& [name, section] : tree) {
        auto known = known_keys().find(name);
        if (known == known_keys().end()) throw ConfigError("unknown section [" + name + "]");
        for (const auto& [key, _] : section) {
            if (!known->second.contains(key)) throw ConfigError("[" + name + "] unknown key " + key);
        }
    }

    EngineConfig c;
    const pt::ptree empty;
    auto section = [&](const std::string& name) -> const pt::ptree& {
        auto it = tree.find(name);
        return it == tree.not_found() ? empty : it->second;
    };

    const auto& r = section("retrieval");
    read(r, "retrieval", "k1", c.store.bm25.k1);
    read(r, "retrieval", "b", c.store.bm25.b);
    read(r, "retrieval", "k_rrf", c.store.k_rrf);
    read(r, "retrieval", "embedding_dim", c.store.embedding_dim);
    read(r, "retrieval", "cell_budget", c.store.cell_budget);
    read(r, "retrieval", "bucket_budget", c.store.bucket_budget);
    read(r, "retrieval", "resolve_speakers", c.store.resolve_speakers);
    read(r, "retrieval", "tag_count", c.store.graph.observations.tag_count);
    read(r, "retrieval", "summary_budget", c.store.graph.observations.summary_budget);
    read(r, "retrieval", "person_jaccard", c.store.graph.merge.person_jaccard);
    read(r, "retrieval", "tag_jaccard", c.store.graph.merge.tag_jaccard);
    read(r, "retrieval", "object_floor", c.store.graph.link.object_floor);

    const auto& s = section("sva");
    read(s, "sva", "retrieve_cells", c.sva.retrieve_cells);
    read(s, "sva", "keep_cells", c.sva.keep_cells);
    read(s, "sva", "bucket_candidates", c.sva.bucket_candidates);
    read(s, "sva", "verify_cameras", c.sva.verify_cameras);
    read(s, "sva", "span_before", c.sva.span_before);
    read(s, "sva", "span_after", c.sva.span_after);
    read(s, "sva", "excerpt_chars", c.sva.excerpt_chars);

    const auto& t = section("tmkg");
    read(t, "tmkg", "tau_score", c.tmkg.tau_score);
    read(t, "tmkg", "tau_margin", c.tmkg.tau_margin);
    read(t, "tmkg", "k", c.tmkg.k);
    read(t, "tmkg", "bonus_person", c.tmkg.bonuses.person);
    read(t, "tmkg", "bonus_place", c.tmkg.bonuses.place);
    read(t, "tmkg", "bonus_object", c.tmkg.bonuses.object);
    read(t, "tmkg", "bonus_before_normalisation", c.tmkg.bonus_before_normalisation);

    const auto& g = section("gateway");
    read(g, "gateway", "retries", c.gateway.retries);
    read(g, "gateway", "max_in_flight", c.gateway.max_in_flight);
    if (auto backoff = g.get_optional<std::string>("backoff_ms")) c.gateway.backoff = parse_backoff(*backoff);

    require(c.store.bm25.k1 >= 0.0, "[retrieval] k1 must be >= 0");
    require(c.store.bm25.b >= 0.0 && c.store.bm25.b <= 1.0, "[retrieval] b must be in [0, 1]");
    require(c.store.k_rrf > 0.0, "[retrieval] k_rrf must be > 0");
    require(c.store.embedding_dim >= 1, "[retrieval] embedding_dim must be >= 1");
    require(c.store.cell_budget >= 1 && c.store.bucket_budget >= 1, "[retrieval] budgets must be >= 1");
    require(c.store.graph.merge.person_jaccard >= 0.0 && c.store.graph.merge.person_jaccard <= 1.0,
            "[retrieval] person_jaccard must be in [0, 1]");
    require(c.store.graph.merge.tag_jaccard >= 0.0 && c.store.graph.merge.tag_jaccard <= 1.0,
            "[retrieval] tag_jaccard must be in [0, 1]");
    require(c.sva.keep_cells >= 1 && c.sva.bucket_candidates >= 1 && c.sva.verify_cameras >= 1,
            "[sva] counts must be >= 1");
    require(c.sva.retrieve_cells >= c.sva.keep_cells, "[sva] retrieve_cells must be >= keep_cells");
    require(c.sva.span_before >= 0 && c.sva.span_after >= 1, "[sva] need span_before >= 0 and span_after >= 1");
    require(c.tmkg.tau_score >= 0.0 && c.tmkg.tau_margin >= 0.0 && c.tmkg.tau_margin <= 1.0,
            "[tmkg] thresholds out of range");
    require(c.tmkg.k >= 1, "[tmkg] k must be >= 1");
    require(c.gateway.retries >= 0, "[gateway] retries must be >= 0");
    require(c.gateway.max_in_flight >= 1, "[gateway] max_in_flight must be >= 1");
    require(c.gateway.backoff.size() >= static_cast<std::size_t>(c.gateway.retries),
            "[gateway] backoff_ms needs one entry per retry");
    return c;
}

}  // namespace lvqa
