#include "hopforge/http.hpp"

#include <httplib.h>

#include "hopforge/errors.hpp"

namespace hopforge {

Endpoint parse_endpoint(const std::string& url) {
    const std::string http_prefix = "http://";
    if (url.rfind("https://", 0) == 0)
        throw ValidationError("https endpoints are not supported: " + url);
    if (url.rfind(http_prefix, 0) != 0)
        throw ValidationError("endpoint must start with http://: " + url);
    std::string rest = url.substr(http_prefix.size());
    Endpoint ep;
    size_t slash = rest.find('/');
    std::string hostport = rest.substr(0, slash);
    if (slash != std::string::npos) {
        ep.path_prefix = rest.substr(slash);
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    size_t colon = hostport.rfind(':');
    if (colon == std::string::npos) {
        ep.host = hostport;
        ep.port = 80;
    } else {
        ep.host = hostport.substr(0, colon);
        try {
            ep.port = std::stoi(hostport.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("invalid port in endpoint: " + url);
        }
    }
    if (ep.host.empty()) throw ValidationError("empty host in endpoint: " + url);
    return ep;
}

nlohmann::json http_post_json(const Endpoint& ep, const std::string& path,
                              const nlohmann::json& body, int timeout_ms, int max_retries) {
    if (max_retries < 0) max_retries = 0;
    const std::string payload = body.dump();
    const std::string full_path = ep.path_prefix + path;
    std::string last_error = "no attempts made";

    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        // A fresh client per call keeps the helper safe to use from any
        // thread; connection reuse is irrelevant at our request volumes.
        httplib::Client client(ep.host, ep.port);
        const time_t sec = timeout_ms / 1000;
        const time_t usec = (timeout_ms % 1000) * 1000;
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);

        auto res = client.Post(full_path, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError("invalid JSON from " + ep.host + full_path + ": " + e.what());
        }
    }
    throw TransportError("POST " + ep.host + ":" + std::to_string(ep.port) + full_path +
                         " failed after " + std::to_string(max_retries + 1) +
                         " attempts: " + last_error);
}

} // namespace hopforge
