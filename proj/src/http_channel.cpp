#include "lvqa/http_channel.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include <httplib.h>

#include "lvqa/errors.hpp"
#include "lvqa/retrieval.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

std::string env_or_empty(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    return v == nullptr ? std::string{} : std::string{v};
}

std::string frame_data_url(const std::string& ref) {
    if (ref.starts_with("data:") || ref.starts_with("http://") || ref.starts_with("https://")) return ref;
    std::ifstream in(ref, std::ios::binary);
    if (!in) throw IoError("cannot read frame " + ref);
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    auto mime = ref.ends_with(".png") ? "image/png" : "image/jpeg";
    return std::string("data:") + mime + ";base64," + base64_encode(bytes);
}

/// POSTs `body` to `path` under `url`; returns the parsed JSON reply.
nlohmann::json post_json(const std::string& url, const std::string& path, const std::string& api_key,
                         std::chrono::seconds timeout, const nlohmann::json& body) {
    auto [host, prefix] = split_url(url);
    httplib::Client client(host);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(prefix + path, headers, body.dump(), "application/json");
    if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
            throw TimeoutError("request to " + url + path + " timed out");
        }
        throw HttpError("request to " + url + path + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw HttpError("request to " + url + path + " returned HTTP " + std::to_string(res->status));
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw HttpError("non-JSON body from " + url + path);
    return parsed;
}

}  // namespace

std::optional<EndpointConfig> endpoint_from_env(const std::string& suffix) {
    EndpointConfig cfg;
    cfg.endpoint = env_or_empty("MODEL_ENDPOINT" + suffix);
    if (cfg.endpoint.empty()) return std::nullopt;
    cfg.model = env_or_empty("MODEL_NAME" + suffix);
    cfg.api_key = env_or_empty("MODEL_API_KEY" + suffix);
    return cfg;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, ""};
    auto prefix = url.substr(path_start);
    while (prefix.ends_with('/')) prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

HttpChannel::HttpChannel(EndpointConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("model endpoint is empty");
}

nlohmann::json HttpChannel::request_body(const ModelRequest& req) const {
    auto content = nlohmann::json::array();
    for (const auto& part : req.user_parts) {
        switch (part.kind) {
            case UserPart::Kind::text:
                content.push_back({{"type", "text"}, {"text", part.content}});
                break;
            case UserPart::Kind::evidence_ref:
                content.push_back({{"type", "text"}, {"text", "```evidence\n" + part.content + "\n```"}});
                break;
            case UserPart::Kind::frame_ref:
                content.push_back({{"type", "image_url"}, {"image_url", {{"url", frame_data_url(part.content)}}}});
                break;
        }
    }
    return {{"model", config_.model},
            {"max_tokens", req.budget},
            {"temperature", 0},
            {"messages",
             {{{"role", "system"}, {"content", req.system_text}}, {{"role", "user"}, {"content", content}}}}};
}

std::string HttpChannel::complete(const ModelRequest& req) {
    auto reply = post_json(config_.endpoint, "/chat/completions", config_.api_key, config_.timeout, request_body(req));
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw HttpError("chat completion reply without choices[0].message.content");
    }
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string model, std::string api_key, std::size_t dim)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)), dim_(dim) {}

Embedding RemoteEmbedder::embed(std::string_view text) const {
    nlohmann::json body{{"model", model_}, {"input", std::string(text)}};
    auto reply = post_json(endpoint_, "/embeddings", api_key_, std::chrono::seconds(30), body);
    Embedding e;
    try {
        e.values = reply.at("data").at(0).at("embedding").get<std::vector<float>>();
    } catch (const nlohmann::json::exception&) {
        throw HttpError("embedding reply without data[0].embedding");
    }
    if (e.values.size() != dim_) {
        throw DimensionMismatch("embedder returned " + std::to_string(e.values.size()) + " dims, expected " +
                                std::to_string(dim_));
    }
    double norm = 0.0;
    for (float v : e.values) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    e.retrievable = norm > 0.0;
    if (e.retrievable) {
        for (float& v : e.values) v = static_cast<float>(v / norm);
    }
    return e;
}

}  // namespace lvqa
