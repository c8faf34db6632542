// Command-line front end: synthetic corpora, indexing, answering and scoring.

#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "lvqa/bench_harness.hpp"
#include "lvqa/config.hpp"
#include "lvqa/errors.hpp"
#include "lvqa/http_channel.hpp"
#include "lvqa/stores.hpp"
#include "lvqa/sva_pipeline.hpp"
#include "lvqa/tmkg_pipeline.hpp"

namespace {

using namespace lvqa;
using json = nlohmann::json;

/// Passes requests through and keeps every reply as a fixture line.
class RecordingChannel final : public Channel {
public:
    explicit RecordingChannel(Channel& inner) : inner_(inner) {}

    std::string id() const override { return inner_.id(); }
    bool retryable() const override { return inner_.retryable(); }

    std::string complete(const ModelRequest& req) override {
        auto reply = inner_.complete(req);
        std::lock_guard lock(mu_);
        lines_.push_back(json{{"role", to_string(req.role)}, {"key", user_parts_hash(req.user_parts)}, {"reply", reply}});
        return reply;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        for (const auto& l : lines_) out << l.dump() << '\n';
    }

private:
    Channel& inner_;
    std::mutex mu_;
    std::vector<json> lines_;
};

struct GenArgs {
    std::uint64_t seed = 42;
    std::filesystem::path out;
    std::size_t questions = 100;
    SyntheticConfig config;
};

struct IndexArgs {
    std::filesystem::path corpus;
    std::filesystem::path config;
};

struct AnswerArgs {
    std::filesystem::path corpus;
    std::filesystem::path questions;
    std::filesystem::path out = "answers.jsonl";
    std::filesystem::path config;
    std::filesystem::path fixtures;
    std::filesystem::path record;
    std::filesystem::path ledger;
    std::string pipeline = "sva";
    std::string backend = "oracle";
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
    std::string inject = "none";
    bool remote_embedder = false;
    unsigned jobs = 1;
};

struct EvalArgs {
    std::filesystem::path answers;
    std::filesystem::path questions;
    std::filesystem::path report;
    std::filesystem::path script;
};

EngineConfig engine_config(const std::filesystem::path& path) {
    return path.empty() ? EngineConfig{} : load_config(path);
}

int run_gen(const GenArgs& a) {
    auto corpus = generate_corpus(a.seed, a.config);
    auto questions = generate_questions(corpus.script, a.questions, default_intent_mix());
    std::filesystem::create_directories(a.out);
    corpus.write(a.out);
    save_questions(questions, a.out / "questions.jsonl");
    std::cout << "wrote " << corpus.script.happenings.size() << " happenings and " << questions.size()
              << " questions to " << a.out.string() << '\n';
    return 0;
}

std::shared_ptr<const Embedder> make_embedder(bool remote, std::size_t dim) {
    if (!remote) return nullptr;
    auto cfg = endpoint_from_env("_EMBED");
    if (!cfg) throw ConfigError("--remote-embedder needs MODEL_ENDPOINT_EMBED");
    return std::make_shared<RemoteEmbedder>(cfg->endpoint, cfg->model, cfg->api_key, dim);
}

int run_index(const IndexArgs& a) {
    auto cfg = engine_config(a.config);
    auto stores = CorpusStores::load(a.corpus, cfg.store);
    stores.persist(a.corpus);
    std::cout << "indexed " << stores.cells.documents().size() << " cells, " << stores.buckets.documents().size() << " buckets, "
              << stores.graph.events().size() << " events\n";
    return 0;
}

Injection injection_from(const std::string& s) {
    for (auto i : {Injection::none, Injection::echo, Injection::assert_on_empty, Injection::ungrounded_count}) {
        if (to_string(i) == s) return i;
    }
    throw ConfigError("unknown injection mode " + s);
}

int run_answer(const AnswerArgs& a) {
    auto cfg = engine_config(a.config);
    auto questions = load_questions(a.questions);
    auto db = LaneDatabase::load(a.corpus);
    auto catalogs = std::filesystem::exists(a.corpus / "persons.json")
                        ? Catalogs::load(a.corpus)
                        : Catalogs::from_manifest(db.manifest(), {}, {});
    auto lexicons = std::filesystem::exists(a.corpus / "lexicons.json") ? Lexicons::load(a.corpus / "lexicons.json")
                                                                        : Lexicons::defaults();
    auto stores = CorpusStores::build(db, std::move(catalogs), std::move(lexicons), cfg.store,
                                      make_embedder(a.remote_embedder, cfg.store.embedding_dim));

    // Channels live here; the pipelines only borrow them.
    std::unique_ptr<Channel> primary;
    std::unique_ptr<Channel> verifier;
    std::unique_ptr<Channel> alternative;
    std::optional<GroundTruthScript> script;
    if (a.backend == "oracle") {
        std::ifstream in(a.corpus / "script.json");
        if (!in) throw IoError("oracle backend needs " + (a.corpus / "script.json").string());
        script = GroundTruthScript::from_json(json::parse(in));
        for (const auto& q : questions) {
            if (!q.answer) throw ValidationError("oracle backend needs gold labels; " + q.id + " has none");
        }
        // Targets live in the script; questions loaded from disk must match them.
        OracleOptions opt;
        opt.noise = a.noise;
        opt.noise_seed = a.noise_seed;
        opt.injection = injection_from(a.inject);
        primary = std::make_unique<OracleChannel>(*script, questions, opt);
    } else if (a.backend == "fixtures") {
        primary = std::make_unique<ScriptedChannel>(ScriptedChannel::from_file(a.fixtures));
    } else if (a.backend == "remote") {
        auto main_cfg = endpoint_from_env();
        if (!main_cfg) throw ConfigError("remote backend needs MODEL_ENDPOINT");
        primary = std::make_unique<HttpChannel>(*main_cfg);
        if (auto v = endpoint_from_env("_VERIFY")) verifier = std::make_unique<HttpChannel>(*v);
        if (auto alt = endpoint_from_env("_ALT")) alternative = std::make_unique<HttpChannel>(*alt);
    } else if (a.backend == "disabled") {
        primary = std::make_unique<DisabledChannel>("disabled");
    } else {
        throw ConfigError("unknown backend " + a.backend);
    }

    Channel* main_channel = primary.get();
    std::unique_ptr<RecordingChannel> recorder;
    if (!a.record.empty()) {
        recorder = std::make_unique<RecordingChannel>(*primary);
        main_channel = recorder.get();
    }
    Channel* verify_channel = verifier ? verifier.get() : main_channel;

    Gateway gateway(cfg.gateway);
    std::vector<AnswerRecord> answers(questions.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < questions.size(); i = next++) {
            Question bare = questions[i];
            bare.answer.reset();
            if (a.pipeline == "sva") {
                answers[i] = answer_question_sva(bare, stores, gateway,
                                                 {main_channel, verify_channel, main_channel, nullptr}, cfg.sva);
            } else {
                answers[i] = answer_question_tmkg(bare, stores, gateway, {main_channel, alternative.get()}, cfg.tmkg);
            }
        }
    };
    if (a.pipeline != "sva" && a.pipeline != "tmkg") throw ConfigError("unknown pipeline " + a.pipeline);
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < std::max(1u, a.jobs); ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    save_answers(answers, a.out);
    if (!a.ledger.empty()) gateway.ledger().dump_jsonl(a.ledger);
    if (recorder) recorder->write(a.record);
    std::cout << "answered " << answers.size() << " questions with " << a.pipeline << " -> " << a.out.string() << '\n';
    return 0;
}

int run_eval(const EvalArgs& a) {
    auto answers = load_answers(a.answers);
    auto questions = load_questions(a.questions);
    std::optional<GroundTruthScript> script;
    if (!a.script.empty()) {
        std::ifstream in(a.script);
        if (!in) throw IoError("cannot read " + a.script.string());
        script = GroundTruthScript::from_json(json::parse(in));
    }
    auto report = evaluate(answers, questions, script ? &*script : nullptr);
    auto body = report.to_json().dump(2);
    if (!a.report.empty()) {
        std::ofstream out(a.report);
        if (!out) throw IoError("cannot write " + a.report.string());
        out << body << '\n';
    }
    std::cout << body << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-camera long-video question answering"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen-synthetic", "Write a synthetic corpus, ground-truth script and questions");
    g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--questions", gen.questions, "Number of questions")->capture_default_str();
    g->add_option("--days", gen.config.days)->capture_default_str();
    g->add_option("--ego", gen.config.ego_cameras)->capture_default_str();
    g->add_option("--exo", gen.config.exo_cameras)->capture_default_str();
    g->add_option("--persons", gen.config.persons)->capture_default_str();
    g->add_option("--density", gen.config.density)->capture_default_str();

    IndexArgs idx;
    auto* i = app.add_subcommand("index", "Build and persist indexes and graph segments for a corpus");
    i->add_option("--corpus", idx.corpus)->required();
    i->add_option("--config", idx.config, "INI file");

    AnswerArgs ans;
    auto* a = app.add_subcommand("answer", "Answer questions with one pipeline");
    a->add_option("--corpus", ans.corpus)->required();
    a->add_option("--questions", ans.questions)->required();
    a->add_option("--pipeline", ans.pipeline)->check(CLI::IsMember({"sva", "tmkg"}))->capture_default_str();
    a->add_option("--backend", ans.backend)
        ->check(CLI::IsMember({"oracle", "fixtures", "remote", "disabled"}))
        ->capture_default_str();
    a->add_option("--fixtures", ans.fixtures, "fixtures.jsonl for the fixtures backend");
    a->add_option("--record", ans.record, "Write every reply as a fixture line");
    a->add_option("--out", ans.out)->capture_default_str();
    a->add_option("--ledger", ans.ledger, "Write the call ledger as JSONL");
    a->add_option("--config", ans.config, "INI file");
    a->add_option("--noise", ans.noise, "Oracle noise rate on non-target windows")->capture_default_str();
    a->add_option("--noise-seed", ans.noise_seed)->capture_default_str();
    a->add_option("--inject", ans.inject, "Oracle confabulation mode")
        ->check(CLI::IsMember({"none", "echo", "assert_on_empty", "ungrounded_count"}))
        ->capture_default_str();
    a->add_flag("--remote-embedder", ans.remote_embedder, "Embed via MODEL_ENDPOINT_EMBED");
    a->add_option("--jobs", ans.jobs, "Questions answered in parallel")->capture_default_str();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score answers against gold labels");
    e->add_option("--answers", ev.answers)->required();
    e->add_option("--questions", ev.questions)->required();
    e->add_option("--report", ev.report, "Write the report JSON here");
    e->add_option("--script", ev.script, "script.json for per-intent and wrong-cell breakdowns");

    CLI11_PARSE(app, argc, argv);
    try {
        if (g->parsed()) return run_gen(gen);
        if (i->parsed()) return run_index(idx);
        if (a->parsed()) return run_answer(ans);
        if (e->parsed()) return run_eval(ev);
    } catch (const lvqa::Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    }
    return 1;
}
