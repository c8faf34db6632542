#include "lvqa/model_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "lvqa/errors.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

constexpr std::pair<Role, std::string_view> kRoles[] = {
    {Role::search_rerank, "search_rerank"}, {Role::search_final, "search_final"},
    {Role::verify, "verify"},               {Role::prior, "prior"},
    {Role::judge, "judge"},                 {Role::tmkg_answer, "tmkg_answer"},
    {Role::summarise, "summarise"},         {Role::parse, "parse"}};

using json = nlohmann::json;
using Check = std::optional<std::string>;

bool is_label(const json& j) {
    if (!j.is_string()) return false;
    auto s = j.get<std::string>();
    return s == "A" || s == "B" || s == "C" || s == "D";
}

bool is_unit(const json& j) {
    return j.is_number() && j.get<double>() >= 0.0 && j.get<double>() <= 1.0;
}

Check check_answer(const json& j) {
    if (!j.is_object()) return "reply is not an object";
    if (!j.contains("choice") || !is_label(j["choice"])) return "missing or invalid \"choice\"";
    if (!j.contains("confidence") || !is_unit(j["confidence"])) return "missing or invalid \"confidence\"";
    if (j.contains("supporting_views")) {
        if (!j["supporting_views"].is_array()) return "\"supporting_views\" must be an array";
        for (const auto& v : j["supporting_views"]) {
            if (!v.is_string() && !(v.is_object() && v.contains("camera") && v["camera"].is_string())) {
                return "supporting view must be a camera id or {camera, window}";
            }
        }
    }
    if (j.contains("rationale") && !j["rationale"].is_string()) return "\"rationale\" must be a string";
    return std::nullopt;
}

Check check_verify(const json& j) {
    if (!j.is_object()) return "reply is not an object";
    if (!j.contains("verdict") || !j["verdict"].is_string()) return "missing \"verdict\"";
    auto verdict = j["verdict"].get<std::string>();
    if (verdict != "supports" && verdict != "abstain") return "verdict must be supports or abstain";
    if (verdict == "supports" && (!j.contains("label") || !is_label(j["label"]))) {
        return "supports verdict needs a label";
    }
    if (!j.contains("confidence") || !is_unit(j["confidence"])) return "missing or invalid \"confidence\"";
    if (!j.contains("claims") || !j["claims"].is_array()) return "missing \"claims\" array";
    for (const auto& c : j["claims"]) {
        if (!c.is_object()) return "claim is not an object";
        if (!c.contains("kind") || !c["kind"].is_string()) return "claim without kind";
        auto kind = c["kind"].get<std::string>();
        if (kind != "ocr" && kind != "audio_quote" && kind != "visual" && kind != "context") {
            return "unknown claim kind " + kind;
        }
        if (!c.contains("text") || !c["text"].is_string()) return "claim without text";
        if (!c.contains("evidence_span_ids") || !c["evidence_span_ids"].is_array()) {
            return "claim without evidence_span_ids";
        }
        for (const auto& id : c["evidence_span_ids"]) {
            if (!id.is_string()) return "evidence span id must be a string";
        }
        if (c.contains("localisations")) {
            if (!c["localisations"].is_array()) return "localisations must be an array";
            for (const auto& l : c["localisations"]) {
                if (!l.is_object() || !l.contains("camera") || !l["camera"].is_string() ||
                    !l.contains("timestamp") || !l["timestamp"].is_number_integer() ||
                    !l.contains("region") || !l["region"].is_string()) {
                    return "localisation needs camera, timestamp, region";
                }
            }
        }
        if (c.contains("count_value") && !c["count_value"].is_null() &&
            !(c["count_value"].is_number_integer() && c["count_value"].get<long long>() >= 0)) {
            return "count_value must be a non-negative integer";
        }
    }
    return std::nullopt;
}

Check check_rerank(const json& j) {
    if (!j.is_object() || !j.contains("ranking") || !j["ranking"].is_array()) return "missing \"ranking\"";
    for (const auto& id : j["ranking"]) {
        if (!id.is_string()) return "ranking entries must be strings";
    }
    return std::nullopt;
}

Check check_final(const json& j) {
    if (!j.is_object() || !j.contains("primary") || !j["primary"].is_string()) return "missing \"primary\"";
    if (j.contains("supporting")) {
        if (!j["supporting"].is_array()) return "\"supporting\" must be an array";
        for (const auto& s : j["supporting"]) {
            if (!s.is_object() || !s.contains("camera") || !s["camera"].is_string() ||
                !s.contains("window") || !s["window"].is_string()) {
                return "supporting entry needs camera and window";
            }
        }
    }
    if (j.contains("tentative_choice") && !j["tentative_choice"].is_null() && !is_label(j["tentative_choice"])) {
        return "tentative_choice must be A-D";
    }
    return std::nullopt;
}

Check check_prior(const json& j) {
    if (!j.is_object() || !j.contains("reasoning") || !j["reasoning"].is_string()) return "missing \"reasoning\"";
    if (j.contains("choice") && !j["choice"].is_null() && !is_label(j["choice"])) return "choice must be A-D";
    return std::nullopt;
}

Check check_summary(const json& j) {
    if (!j.is_object() || !j.contains("summary") || !j["summary"].is_string()) return "missing \"summary\"";
    return std::nullopt;
}

/// Model replies sometimes arrive wrapped in a code fence.
std::optional<json> parse_reply_body(const std::string& text) {
    auto parsed = json::parse(text, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    auto open = text.find('{');
    auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    parsed = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    return parsed;
}

}  // namespace

std::string to_string(Role role) {
    for (auto [r, name] : kRoles) {
        if (r == role) return std::string(name);
    }
    return "?";
}

Role role_from_string(std::string_view s) {
    for (auto [r, name] : kRoles) {
        if (name == s) return r;
    }
    throw ValidationError("unknown role '" + std::string(s) + "'");
}

std::string to_string(UserPart::Kind kind) {
    switch (kind) {
        case UserPart::Kind::text: return "text";
        case UserPart::Kind::frame_ref: return "frame_ref";
        case UserPart::Kind::evidence_ref: return "evidence_ref";
    }
    return "?";
}

std::string user_parts_hash(const std::vector<UserPart>& parts) {
    std::string canon;
    for (const auto& p : parts) {
        canon += to_string(p.kind);
        canon.push_back('\0');
        canon += p.content;
        canon.push_back('\0');
    }
    return sha256_hex(canon).substr(0, 16);
}

const nlohmann::json& ModelReply::require() const {
    if (!parsed) throw SchemaViolation("reply from " + backend_id + " violates schema: " + schema_error);
    return *parsed;
}

// ---------------------------------------------------------------- schemas

SchemaRegistry::SchemaRegistry() {
    add("answer_v1", check_answer);
    add("verify_v1", check_verify);
    add("rerank_v1", check_rerank);
    add("search_final_v1", check_final);
    add("prior_v1", check_prior);
    add("summary_v1", check_summary);
}

void SchemaRegistry::add(std::string name, SchemaCheck check) { checks_[std::move(name)] = std::move(check); }

bool SchemaRegistry::has(const std::string& name) const { return checks_.contains(name); }

std::optional<std::string> SchemaRegistry::check(const std::string& name, const nlohmann::json& j) const {
    auto it = checks_.find(name);
    if (it == checks_.end()) return "unregistered schema " + name;
    return it->second(j);
}

// ---------------------------------------------------------------- channels

std::string DisabledChannel::complete(const ModelRequest&) {
    throw HttpError("channel " + name_ + " is disabled");
}

ScriptedChannel ScriptedChannel::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixtures " + path.string());
    ScriptedChannel ch("scripted:" + path.filename().string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const auto& reply = j.at("reply");
            ch.add(role_from_string(j.at("role").get<std::string>()), j.at("key").get<std::string>(),
                   reply.is_string() ? reply.get<std::string>() : reply.dump());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), n);
        }
    }
    return ch;
}

void ScriptedChannel::add(Role role, const std::string& key, std::string reply) {
    fixtures_[{role, key}] = std::move(reply);
}

void ScriptedChannel::add_for(const ModelRequest& req, std::string reply) {
    add(req.role, user_parts_hash(req.user_parts), std::move(reply));
}

void ScriptedChannel::consult(Channel* delegate) { delegate_ = delegate; }

std::string ScriptedChannel::complete(const ModelRequest& req) {
    auto key = user_parts_hash(req.user_parts);
    auto it = fixtures_.find({req.role, key});
    if (it != fixtures_.end()) return it->second;
    if (delegate_ != nullptr) return delegate_->complete(req);
    throw HttpError("no fixture for (" + to_string(req.role) + ", " + key + ")");
}

// ---------------------------------------------------------------- ledger

std::string to_string(CallStatus s) {
    switch (s) {
        case CallStatus::ok: return "ok";
        case CallStatus::error: return "error";
        case CallStatus::schema_violation: return "schema_violation";
        case CallStatus::synthetic: return "synthetic";
    }
    return "?";
}

void CallLedger::append(const std::string& question_id, LedgerEntry entry) {
    std::lock_guard lock(mu_);
    ++totals_[entry.role];
    entries_[question_id].push_back(std::move(entry));
}

std::vector<LedgerEntry> CallLedger::entries(const std::string& question_id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(question_id);
    return it == entries_.end() ? std::vector<LedgerEntry>{} : it->second;
}

bool CallLedger::has(const std::string& question_id) const {
    std::lock_guard lock(mu_);
    return entries_.contains(question_id);
}

LedgerReport CallLedger::report(const std::string& question_id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(question_id);
    if (it == entries_.end()) throw UnknownQuestion("no calls recorded for question " + question_id);
    LedgerReport r;
    for (const auto& e : it->second) {
        ++r.per_role[e.role];
        ++r.total;
    }
    return r;
}

std::map<Role, int> CallLedger::totals() const {
    std::lock_guard lock(mu_);
    return totals_;
}

void CallLedger::dump_jsonl(const std::filesystem::path& path) const {
    std::lock_guard lock(mu_);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [qid, list] : entries_) {
        for (const auto& e : list) {
            out << nlohmann::json{{"question_id", qid}, {"role", to_string(e.role)},
                                  {"backend", e.backend_id}, {"status", to_string(e.status)}}
                       .dump()
                << '\n';
        }
    }
}

LedgerReport ledger_report(const CallLedger& ledger, const std::string& question_id) {
    return ledger.report(question_id);
}

// ---------------------------------------------------------------- gateway

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)), in_flight_(std::clamp(options_.max_in_flight, 1, 64)) {}

ModelReply Gateway::send(const ModelRequest& req, Channel& channel) {
    if (!schemas_.has(req.expected_schema)) {
        throw ValidationError("request expects unregistered schema '" + req.expected_schema + "'");
    }
    ModelReply reply;
    reply.backend_id = channel.id();
    auto started = std::chrono::steady_clock::now();
    for (int attempt = 0;; ++attempt) {
        try {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<64>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            reply.text = channel.complete(req);
            break;
        } catch (const GatewayError&) {
            if (attempt >= options_.retries || !channel.retryable()) {
                ledger_.append(req.question_id, {req.role, channel.id(), CallStatus::error});
                throw;
            }
            if (!options_.backoff.empty()) {
                auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt), options_.backoff.size() - 1);
                std::this_thread::sleep_for(options_.backoff[idx]);
            }
        }
    }
    reply.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    auto body = parse_reply_body(reply.text);
    if (!body) {
        reply.schema_error = "reply is not JSON";
    } else if (auto err = schemas_.check(req.expected_schema, *body)) {
        reply.schema_error = *err;
    } else {
        reply.parsed = std::move(*body);
    }
    ledger_.append(req.question_id,
                   {req.role, channel.id(), reply.parsed ? CallStatus::ok : CallStatus::schema_violation});
    return reply;
}

ModelReply Gateway::run_with_fallback(const ModelRequest& req, std::span<Channel* const> chain,
                                      const DefaultReplyFn& default_fn) {
    for (Channel* ch : chain) {
        if (ch == nullptr) continue;
        try {
            auto reply = send(req, *ch);
            if (reply.parsed) return reply;
        } catch (const Error&) {
        }
    }
    ModelReply reply;
    reply.backend_id = "local-default";
    reply.synthetic = true;
    auto body = default_fn(req);
    reply.text = body.dump();
    if (auto err = schemas_.check(req.expected_schema, body)) {
        reply.schema_error = *err;
    } else {
        reply.parsed = std::move(body);
    }
    ledger_.append(req.question_id, {req.role, reply.backend_id, CallStatus::synthetic});
    return reply;
}

}  // namespace lvqa
