#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lvqa {

/// Pipeline stage that issued a model call.
enum class Role { search_rerank, search_final, verify, prior, judge, tmkg_answer, summarise, parse };

std::string to_string(Role role);
Role role_from_string(std::string_view s);

struct UserPart {
    enum class Kind { text, frame_ref, evidence_ref };

    Kind kind = Kind::text;
    std::string content;

    static UserPart text(std::string s) { return {Kind::text, std::move(s)}; }
    static UserPart frame(std::string s) { return {Kind::frame_ref, std::move(s)}; }
    static UserPart evidence(std::string s) { return {Kind::evidence_ref, std::move(s)}; }

    bool operator==(const UserPart&) const = default;
};

std::string to_string(UserPart::Kind kind);

struct ModelRequest {
    std::string question_id;  // ledger key; empty for offline work
    Role role = Role::judge;
    std::string system_text;
    std::vector<UserPart> user_parts;
    std::string expected_schema;
    int budget = 1024;
};

/// Stable key of a request's user parts (hex SHA-256 prefix).
std::string user_parts_hash(const std::vector<UserPart>& parts);

struct ModelReply {
    std::string text;
    std::optional<nlohmann::json> parsed;  // set iff `text` validates
    std::string schema_error;
    double latency_ms = 0.0;
    std::string backend_id;
    bool synthetic = false;  // produced by a local default, not a model

    bool schema_violation() const { return !parsed.has_value(); }
    /// Parsed body or SchemaViolation.
    const nlohmann::json& require() const;
};

// ---------------------------------------------------------------- schemas

/// Returns an error message, or nullopt when `j` conforms.
using SchemaCheck = std::function<std::optional<std::string>(const nlohmann::json& j)>;

/// Named reply schemas. The built-ins are answer_v1, verify_v1, rerank_v1,
/// search_final_v1, prior_v1 and summary_v1.
class SchemaRegistry {
public:
    SchemaRegistry();

    void add(std::string name, SchemaCheck check);
    bool has(const std::string& name) const;
    std::optional<std::string> check(const std::string& name, const nlohmann::json& j) const;

private:
    std::map<std::string, SchemaCheck> checks_;
};

// ---------------------------------------------------------------- channels

/// One model backend. `complete` returns the raw reply text or throws a
/// GatewayError (HttpError / TimeoutError).
class Channel {
public:
    virtual ~Channel() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const ModelRequest& req) = 0;
    /// False when failures are deterministic (disabled, scripted, local rules);
    /// the gateway then fails at once instead of retrying.
    virtual bool retryable() const { return true; }
};

/// Always unreachable.
class DisabledChannel final : public Channel {
public:
    explicit DisabledChannel(std::string name = "disabled") : name_(std::move(name)) {}
    std::string id() const override { return name_; }
    std::string complete(const ModelRequest& req) override;
    bool retryable() const override { return false; }

private:
    std::string name_;
};

/// Local rule behind the channel interface.
class LocalChannel final : public Channel {
public:
    using Fn = std::function<std::string(const ModelRequest&)>;

    LocalChannel(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string id() const override { return name_; }
    std::string complete(const ModelRequest& req) override { return fn_(req); }
    bool retryable() const override { return false; }

private:
    std::string name_;
    Fn fn_;
};

/// Replays fixtures keyed by (role, user_parts_hash).
class ScriptedChannel final : public Channel {
public:
    enum class UnknownPolicy { error, consult };

    explicit ScriptedChannel(std::string name = "scripted") : name_(std::move(name)) {}

    /// fixtures.jsonl: {"role": ..., "key": ..., "reply": ...} per line.
    static ScriptedChannel from_file(const std::filesystem::path& path);

    void add(Role role, const std::string& key, std::string reply);
    void add_for(const ModelRequest& req, std::string reply);
    /// Unknown keys go to `delegate` instead of raising.
    void consult(Channel* delegate);

    std::string id() const override { return name_; }
    std::string complete(const ModelRequest& req) override;
    bool retryable() const override { return false; }

private:
    std::string name_;
    std::map<std::pair<Role, std::string>, std::string> fixtures_;
    Channel* delegate_ = nullptr;
};

// ---------------------------------------------------------------- ledger

enum class CallStatus { ok, error, schema_violation, synthetic };

std::string to_string(CallStatus s);

struct LedgerEntry {
    Role role = Role::judge;
    std::string backend_id;
    CallStatus status = CallStatus::ok;
};

struct LedgerReport {
    std::map<Role, int> per_role;
    int total = 0;
};

/// Append-only per-question record of every model call.
class CallLedger {
public:
    void append(const std::string& question_id, LedgerEntry entry);
    std::vector<LedgerEntry> entries(const std::string& question_id) const;
    bool has(const std::string& question_id) const;
    /// Throws UnknownQuestion for ids never seen.
    LedgerReport report(const std::string& question_id) const;
    std::map<Role, int> totals() const;
    void dump_jsonl(const std::filesystem::path& path) const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<LedgerEntry>> entries_;
    std::map<Role, int> totals_;
};

// ---------------------------------------------------------------- gateway

struct GatewayOptions {
    int retries = 2;
    std::vector<std::chrono::milliseconds> backoff = {std::chrono::milliseconds(1000),
                                                      std::chrono::milliseconds(4000)};
    int max_in_flight = 4;
};

/// Local rule producing a schema-conforming body when every channel failed.
using DefaultReplyFn = std::function<nlohmann::json(const ModelRequest&)>;

/// The single choke-point for model traffic. Shareable across threads.
class Gateway {
public:
    explicit Gateway(GatewayOptions options = {});

    /// One round-trip with retries on transport errors. Schema violations are
    /// returned with the marker set; transport errors are rethrown after the
    /// retries are spent. Every call leaves exactly one ledger entry.
    ModelReply send(const ModelRequest& req, Channel& channel);

    /// Tries `chain` in order, then `default_fn`. Never throws for channel failures.
    ModelReply run_with_fallback(const ModelRequest& req, std::span<Channel* const> chain,
                                 const DefaultReplyFn& default_fn);

    CallLedger& ledger() { return ledger_; }
    const CallLedger& ledger() const { return ledger_; }
    SchemaRegistry& schemas() { return schemas_; }

private:
    GatewayOptions options_;
    SchemaRegistry schemas_;
    CallLedger ledger_;
    std::counting_semaphore<64> in_flight_;
};

/// Per-stage counts for one question.
LedgerReport ledger_report(const CallLedger& ledger, const std::string& question_id);

/// A gateway plus the channel a stage should use.
struct ModelBinding {
    Gateway* gateway = nullptr;
    Channel* channel = nullptr;
};

}  // namespace lvqa
