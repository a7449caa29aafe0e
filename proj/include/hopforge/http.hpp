#pragma once

#include <string>

#include <json.hpp>

namespace hopforge {

struct Endpoint {
    std::string host;
    int port = 80;
    std::string path_prefix; // no trailing slash
};

// Accepts "http://host:port[/prefix]". TLS is out of scope; https is
// rejected as a configuration error.
Endpoint parse_endpoint(const std::string& url);

// POST with a JSON body; retries transport failures and non-2xx statuses.
// Attempts = 1 + max_retries. A 2xx response that fails to parse or match
// the expected shape is a ProtocolError and is not retried.
nlohmann::json http_post_json(const Endpoint& ep, const std::string& path,
                              const nlohmann::json& body, int timeout_ms, int max_retries);

} // namespace hopforge
