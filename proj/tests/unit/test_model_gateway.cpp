#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "helpers.hpp"
#include "lvqa/errors.hpp"
#include "lvqa/http_channel.hpp"
#include "lvqa/model_gateway.hpp"

using namespace lvqa;
using namespace lvqa::testing;
using nlohmann::json;

namespace {

GatewayOptions fast_options(int retries = 2) {
    GatewayOptions o;
    o.retries = retries;
    o.backoff = {std::chrono::milliseconds(1), std::chrono::milliseconds(2)};
    return o;
}

ModelRequest answer_request(std::string qid = "q1", std::string body = "question text") {
    ModelRequest r;
    r.question_id = std::move(qid);
    r.role = Role::judge;
    r.system_text = "answer";
    r.user_parts = {UserPart::text(std::move(body)), UserPart::evidence("[s1] ocr: EXIT")};
    r.expected_schema = "answer_v1";
    return r;
}

const std::string kGoodAnswer = R"({"choice":"B","confidence":0.7,"supporting_views":["exo2"],"rationale":"r"})";

/// Fails the first `failures` calls with a transport error, then answers.
class FlakyChannel final : public Channel {
public:
    FlakyChannel(int failures, std::string reply) : failures_(failures), reply_(std::move(reply)) {}
    std::string id() const override { return "flaky"; }
    std::string complete(const ModelRequest&) override {
        ++calls;
        if (calls <= failures_) throw HttpError("transient");
        return reply_;
    }
    int calls = 0;

private:
    int failures_;
    std::string reply_;
};

/// Tracks the peak number of concurrent calls.
class SlowChannel final : public Channel {
public:
    std::string id() const override { return "slow"; }
    std::string complete(const ModelRequest&) override {
        int now = ++active;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        --active;
        return kGoodAnswer;
    }
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
};

/// Chat-completions stand-in on a random local port.
class MockServer {
public:
    MockServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = json::parse(req.body);
            last_auth = req.get_header_value("Authorization");
            if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            if (status != 200) {
                res.status = status;
                return;
            }
            json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
            if (malformed) reply = json{{"nothing", true}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::string content = kGoodAnswer;
    int status = 200;
    bool malformed = false;
    int delay_ms = 0;
    json last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(Schemas, AnswerRequiresChoice) {
    SchemaRegistry reg;
    EXPECT_FALSE(reg.check("answer_v1", json::parse(kGoodAnswer)).has_value());
    EXPECT_TRUE(reg.check("answer_v1", json{{"confidence", 0.5}}).has_value());
    EXPECT_TRUE(reg.check("answer_v1", json{{"choice", "E"}, {"confidence", 0.5}}).has_value());
    EXPECT_TRUE(reg.check("answer_v1", json{{"choice", "A"}, {"confidence", 1.5}}).has_value());
    EXPECT_TRUE(reg.check("nope_v9", json::object()).has_value());
}

TEST(Schemas, VerifyShape) {
    SchemaRegistry reg;
    json ok{{"verdict", "supports"},
            {"label", "C"},
            {"confidence", 0.9},
            {"claims",
             {{{"kind", "visual"},
               {"text", "3 mugs"},
               {"evidence_span_ids", {"s1"}},
               {"count_value", 3},
               {"localisations", {{{"camera", "exo1"}, {"timestamp", 100}, {"region", "table-left"}}}}}}}};
    EXPECT_FALSE(reg.check("verify_v1", ok).has_value());
    auto no_label = ok;
    no_label.erase("label");
    EXPECT_TRUE(reg.check("verify_v1", no_label).has_value());
    auto bad_kind = ok;
    bad_kind["claims"][0]["kind"] = "rumour";
    EXPECT_TRUE(reg.check("verify_v1", bad_kind).has_value());
    EXPECT_FALSE(reg.check("verify_v1", json{{"verdict", "abstain"}, {"confidence", 0}, {"claims", json::array()}})
                     .has_value());
}

TEST(Hash, StableAndKindSensitive) {
    std::vector<UserPart> a = {UserPart::text("x"), UserPart::text("y")};
    std::vector<UserPart> b = {UserPart::text("x"), UserPart::evidence("y")};
    std::vector<UserPart> c = {UserPart::text("xy")};
    EXPECT_EQ(user_parts_hash(a), user_parts_hash(a));
    EXPECT_NE(user_parts_hash(a), user_parts_hash(b));
    EXPECT_NE(user_parts_hash(a), user_parts_hash(c));
    EXPECT_EQ(user_parts_hash(a).size(), 16u);
}

TEST(Send, ScriptedFixtureReply) {
    Gateway gw(fast_options());
    ScriptedChannel ch;
    auto req = answer_request();
    ch.add_for(req, kGoodAnswer);
    auto reply = gw.send(req, ch);
    ASSERT_FALSE(reply.schema_violation());
    EXPECT_EQ(reply.require()["choice"], "B");
    EXPECT_EQ(reply.backend_id, "scripted");
    auto rep = ledger_report(gw.ledger(), "q1");
    EXPECT_EQ(rep.total, 1);
    EXPECT_EQ(rep.per_role[Role::judge], 1);
}

TEST(Send, ScriptedKeyIncludesRole) {
    Gateway gw(fast_options());
    ScriptedChannel ch;
    auto req = answer_request();
    ch.add_for(req, kGoodAnswer);
    req.role = Role::tmkg_answer;
    EXPECT_THROW(gw.send(req, ch), HttpError);
    EXPECT_EQ(gw.ledger().entries("q1").at(0).status, CallStatus::error);
}

TEST(Send, ScriptedConsultsDelegate) {
    Gateway gw(fast_options());
    ScriptedChannel ch;
    LocalChannel oracle("oracle", [](const ModelRequest&) { return kGoodAnswer; });
    ch.consult(&oracle);
    EXPECT_FALSE(gw.send(answer_request(), ch).schema_violation());
}

TEST(Send, FixturesFileRoundTrip) {
    TempDir dir;
    auto req = answer_request();
    write_file(dir / "fixtures.jsonl", json{{"role", "judge"}, {"key", user_parts_hash(req.user_parts)},
                                            {"reply", json::parse(kGoodAnswer)}}
                                               .dump() +
                                           "\n");
    auto ch = ScriptedChannel::from_file(dir / "fixtures.jsonl");
    Gateway gw(fast_options());
    EXPECT_EQ(gw.send(req, ch).require()["choice"], "B");
    write_file(dir / "bad.jsonl", "{\"role\": \"judge\"}\n");
    EXPECT_THROW(ScriptedChannel::from_file(dir / "bad.jsonl"), ParseError);
    EXPECT_THROW(ScriptedChannel::from_file(dir / "missing.jsonl"), IoError);
}

TEST(Send, SchemaViolationKeepsReplyWithMarker) {
    Gateway gw(fast_options());
    LocalChannel ch("local", [](const ModelRequest&) { return R"({"confidence":0.4})"; });
    auto reply = gw.send(answer_request(), ch);
    EXPECT_TRUE(reply.schema_violation());
    EXPECT_EQ(reply.text, R"({"confidence":0.4})");
    EXPECT_NE(reply.schema_error.find("choice"), std::string::npos);
    EXPECT_THROW(reply.require(), SchemaViolation);
    EXPECT_EQ(gw.ledger().entries("q1").at(0).status, CallStatus::schema_violation);
}

TEST(Send, FencedJsonAccepted) {
    Gateway gw(fast_options());
    LocalChannel ch("local", [](const ModelRequest&) { return "```json\n" + kGoodAnswer + "\n```"; });
    EXPECT_FALSE(gw.send(answer_request(), ch).schema_violation());
}

TEST(Send, UnregisteredSchemaRejected) {
    Gateway gw(fast_options());
    auto req = answer_request();
    req.expected_schema = "mystery";
    LocalChannel ch("local", [](const ModelRequest&) { return kGoodAnswer; });
    EXPECT_THROW(gw.send(req, ch), ValidationError);
}

TEST(Send, RetriesTransientErrors) {
    Gateway gw(fast_options(2));
    FlakyChannel ok_on_third(2, kGoodAnswer);
    EXPECT_FALSE(gw.send(answer_request(), ok_on_third).schema_violation());
    EXPECT_EQ(ok_on_third.calls, 3);
    EXPECT_EQ(ledger_report(gw.ledger(), "q1").total, 1);

    FlakyChannel never(100, kGoodAnswer);
    EXPECT_THROW(gw.send(answer_request("q2"), never), HttpError);
    EXPECT_EQ(never.calls, 3);
    EXPECT_EQ(gw.ledger().entries("q2").at(0).status, CallStatus::error);
}

TEST(Send, BackoffSchedule) {
    GatewayOptions o;
    o.retries = 2;
    o.backoff = {std::chrono::milliseconds(30), std::chrono::milliseconds(60)};
    Gateway gw(o);
    FlakyChannel never(100, kGoodAnswer);
    auto t0 = std::chrono::steady_clock::now();
    EXPECT_THROW(gw.send(answer_request(), never), HttpError);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_GE(ms, 90);
}

TEST(Send, DeterministicChannelsAreNotRetried) {
    Gateway gw(fast_options(5));
    DisabledChannel off;
    EXPECT_THROW(gw.send(answer_request(), off), HttpError);
    EXPECT_EQ(gw.ledger().entries("q1").size(), 1u);
}

TEST(Send, InFlightBound) {
    GatewayOptions o = fast_options();
    o.max_in_flight = 2;
    Gateway gw(o);
    SlowChannel ch;
    std::vector<std::thread> ts;
    for (int i = 0; i < 8; ++i) ts.emplace_back([&, i] { gw.send(answer_request("q" + std::to_string(i)), ch); });
    for (auto& t : ts) t.join();
    EXPECT_LE(ch.peak.load(), 2);
    EXPECT_EQ(gw.ledger().totals().at(Role::judge), 8);
}

TEST(Fallback, FirstChannelSucceeds) {
    Gateway gw(fast_options());
    LocalChannel a("a", [](const ModelRequest&) { return kGoodAnswer; });
    DisabledChannel b;
    std::vector<Channel*> chain = {&a, &b};
    bool defaulted = false;
    auto reply = gw.run_with_fallback(answer_request(), chain, [&](const ModelRequest&) {
        defaulted = true;
        return json{{"choice", "A"}, {"confidence", 0.0}};
    });
    EXPECT_FALSE(reply.synthetic);
    EXPECT_FALSE(defaulted);
    EXPECT_EQ(ledger_report(gw.ledger(), "q1").total, 1);
}

TEST(Fallback, TwoFailuresThenDefault) {
    Gateway gw(fast_options());
    DisabledChannel a("a"), b("b");
    std::vector<Channel*> chain = {&a, &b};
    auto reply = gw.run_with_fallback(answer_request(), chain, [](const ModelRequest&) {
        return json{{"choice", "D"}, {"confidence", 0.0}};
    });
    EXPECT_TRUE(reply.synthetic);
    EXPECT_EQ(reply.require()["choice"], "D");
    auto entries = gw.ledger().entries("q1");
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].backend_id, "a");
    EXPECT_EQ(entries[1].backend_id, "b");
    EXPECT_EQ(entries[2].status, CallStatus::synthetic);
}

TEST(Fallback, AllSchemaViolatingWalksChain) {
    Gateway gw(fast_options());
    int calls = 0;
    LocalChannel a("a", [&](const ModelRequest&) {
        ++calls;
        return R"({"choice":"Z"})";
    });
    LocalChannel b("b", [&](const ModelRequest&) {
        ++calls;
        return "not json";
    });
    std::vector<Channel*> chain = {&a, &b};
    auto reply = gw.run_with_fallback(answer_request(), chain, [](const ModelRequest&) {
        return json{{"choice", "C"}, {"confidence", 0.1}};
    });
    EXPECT_EQ(calls, 2);
    EXPECT_TRUE(reply.synthetic);
    EXPECT_EQ(reply.require()["choice"], "C");
    auto entries = gw.ledger().entries("q1");
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].status, CallStatus::schema_violation);
    EXPECT_EQ(entries[1].status, CallStatus::schema_violation);
}

TEST(Ledger, UnknownQuestionAndTotals) {
    Gateway gw(fast_options());
    EXPECT_THROW(ledger_report(gw.ledger(), "q404"), UnknownQuestion);
    LocalChannel ch("local", [](const ModelRequest&) { return kGoodAnswer; });
    for (int i = 0; i < 3; ++i) gw.send(answer_request("q1"), ch);
    auto req = answer_request("q2");
    req.role = Role::tmkg_answer;
    gw.send(req, ch);
    auto rep = ledger_report(gw.ledger(), "q1");
    EXPECT_EQ(rep.total, 3);
    EXPECT_EQ(gw.ledger().totals().at(Role::judge), 3);
    EXPECT_EQ(gw.ledger().totals().at(Role::tmkg_answer), 1);

    TempDir dir;
    gw.ledger().dump_jsonl(dir / "ledger.jsonl");
    auto body = read_file(dir / "ledger.jsonl");
    EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 4);
    EXPECT_NE(body.find("\"role\":\"tmkg_answer\""), std::string::npos);
}

TEST(Http, SplitUrl) {
    EXPECT_EQ(split_url("http://h:8000/v1/"), (std::pair<std::string, std::string>{"http://h:8000", "/v1"}));
    EXPECT_EQ(split_url("http://h:8000"), (std::pair<std::string, std::string>{"http://h:8000", ""}));
}

TEST(Http, RequestBodyContract) {
    HttpChannel ch({"http://127.0.0.1:1/v1", "m1", "", std::chrono::seconds(1)});
    ModelRequest r = answer_request();
    r.user_parts.push_back(UserPart::frame("data:image/png;base64,AAAA"));
    auto body = ch.request_body(r);
    EXPECT_EQ(body["model"], "m1");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    const auto& parts = body["messages"][1]["content"];
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_EQ(parts[0]["type"], "text");
    EXPECT_EQ(parts[1]["text"], "```evidence\n[s1] ocr: EXIT\n```");
    EXPECT_EQ(parts[2]["type"], "image_url");
    EXPECT_EQ(parts[2]["image_url"]["url"], "data:image/png;base64,AAAA");
}

TEST(Http, FrameFilesBecomeDataUrls) {
    TempDir dir;
    write_file(dir / "f.png", "abc");
    HttpChannel ch({"http://127.0.0.1:1/v1", "m1", "", std::chrono::seconds(1)});
    ModelRequest r = answer_request();
    r.user_parts = {UserPart::frame((dir / "f.png").string())};
    EXPECT_EQ(ch.request_body(r)["messages"][1]["content"][0]["image_url"]["url"], "data:image/png;base64,YWJj");
    r.user_parts = {UserPart::frame((dir / "none.png").string())};
    EXPECT_THROW(ch.request_body(r), IoError);
}

TEST(Http, RoundTripAgainstMockServer) {
    MockServer server;
    HttpChannel ch({server.url(), "m1", "sekret", std::chrono::seconds(5)});
    Gateway gw(fast_options());
    auto reply = gw.send(answer_request(), ch);
    EXPECT_EQ(reply.require()["choice"], "B");
    EXPECT_EQ(server.last_auth, "Bearer sekret");
    EXPECT_EQ(server.last_body["messages"][1]["content"][0]["text"], "question text");
    EXPECT_EQ(reply.backend_id, "http:m1");
}

TEST(Http, ServerErrorsAreHttpErrors) {
    MockServer server;
    server.status = 500;
    HttpChannel ch({server.url(), "m1", "", std::chrono::seconds(5)});
    Gateway gw(fast_options(1));
    EXPECT_THROW(gw.send(answer_request(), ch), HttpError);
    server.status = 200;
    server.malformed = true;
    EXPECT_THROW(gw.send(answer_request(), ch), HttpError);
}

TEST(Http, SlowReplyIsTimeout) {
    MockServer server;
    server.delay_ms = 1500;
    HttpChannel ch({server.url(), "m1", "", std::chrono::seconds(1)});
    Gateway gw(fast_options(0));
    EXPECT_THROW(gw.send(answer_request(), ch), TimeoutError);
}

TEST(Http, UnreachableEndpointAfterRetries) {
    // Nothing listens on port 1, so the connection is refused.
    HttpChannel ch({"http://127.0.0.1:1/v1", "m1", "", std::chrono::seconds(1)});
    Gateway gw(fast_options(2));
    EXPECT_THROW(gw.send(answer_request(), ch), HttpError);
    EXPECT_EQ(gw.ledger().entries("q1").size(), 1u);
    EXPECT_EQ(gw.ledger().entries("q1")[0].status, CallStatus::error);
}

TEST(Http, EndpointFromEnv) {
    ::setenv("MODEL_ENDPOINT_UNITTEST", "http://x:1/v1", 1);
    ::setenv("MODEL_NAME_UNITTEST", "judge-model", 1);
    auto cfg = endpoint_from_env("_UNITTEST");
    ASSERT_TRUE(cfg.has_value());
    EXPECT_EQ(cfg->model, "judge-model");
    EXPECT_TRUE(cfg->api_key.empty());
    EXPECT_FALSE(endpoint_from_env("_UNSET_SUFFIX").has_value());
    ::unsetenv("MODEL_ENDPOINT_UNITTEST");
    ::unsetenv("MODEL_NAME_UNITTEST");
}
