#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "lvqa/model_gateway.hpp"

namespace lvqa {

struct EndpointConfig {
    std::string endpoint;  // base URL, e.g. http://host:8000/v1
    std::string model;
    std::string api_key;
    std::chrono::seconds timeout{60};
};

/// Reads MODEL_ENDPOINT, MODEL_NAME and MODEL_API_KEY, each with `suffix`
/// appended (e.g. "_VERIFY"). Returns nullopt when the endpoint is unset.
std::optional<EndpointConfig> endpoint_from_env(const std::string& suffix = "");

/// Splits "http://host:port/base" into the scheme-host part and the path prefix.
std::pair<std::string, std::string> split_url(const std::string& url);

/// OpenAI-compatible chat completions client. Frames travel as data-URL image
/// parts and evidence as fenced text blocks.
class HttpChannel final : public Channel {
public:
    explicit HttpChannel(EndpointConfig config);

    std::string id() const override { return "http:" + config_.model; }
    std::string complete(const ModelRequest& req) override;

    /// The JSON body sent for `req`.
    nlohmann::json request_body(const ModelRequest& req) const;

private:
    EndpointConfig config_;
};

}  // namespace lvqa
