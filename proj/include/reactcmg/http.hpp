#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>

#include "reactcmg/errors.hpp"

namespace reactcmg {

struct ParsedUrl {
    bool tls = false;
    std::string host;
    int port = 80;
    std::string path; // may be empty when the URL carries no path
};

inline ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    std::string rest;
    if (url.rfind("http://", 0) == 0) {
        out.tls = false;
        out.port = 80;
        rest = url.substr(7);
    } else if (url.rfind("https://", 0) == 0) {
        out.tls = true;
        out.port = 443;
        rest = url.substr(8);
    } else {
        throw ConfigError("endpoint URL must start with http:// or https://: " + url);
    }
    auto slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    out.path = slash == std::string::npos ? std::string() : rest.substr(slash);
    auto colon = authority.find(':');
    if (colon == std::string::npos) {
        out.host = authority;
    } else {
        out.host = authority.substr(0, colon);
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("invalid port in endpoint URL: " + url);
        }
    }
    if (out.host.empty()) throw ConfigError("endpoint URL has no host: " + url);
    return out;
}

struct HttpOptions {
    double timeout_seconds = 60.0;
    int retries = 2;              // total attempts = retries + 1
    int backoff_initial_ms = 1000; // doubles each retry: 1s, 2s, 4s, ...
    bool retry_on_429 = true;     // chat retries 429; embeddings treats every 4xx as fatal
    std::string bearer_token;     // empty = no Authorization header
};

struct HttpResult {
    int status = 0;
    std::string body;
    int attempts = 0;
};

namespace detail {

inline std::string body_excerpt(const std::string& body, std::size_t limit = 200) {
    std::string out;
    out.reserve(std::min(body.size(), limit));
    for (char c : body) {
        if (out.size() >= limit) break;
        out.push_back(c == '\n' || c == '\r' ? ' ' : c);
    }
    if (body.size() > limit) out += "...";
    return out;
}

} // namespace detail

/// POST a JSON body and return the response, retrying transient failures
/// (connect errors, timeouts, 5xx, optionally 429) with exponential backoff.
/// Other 4xx statuses raise ConfigError immediately with a body excerpt;
/// exhausting the retry budget raises RetryableError.
inline HttpResult post_json_with_retries(const ParsedUrl& url, const std::string& request_path,
                                         const nlohmann::json& body, const HttpOptions& opts) {
    const std::string base =
        (url.tls ? "https://" : "http://") + url.host + ":" + std::to_string(url.port);
    const std::string payload = body.dump();
    const int max_attempts = opts.retries + 1;
    std::string last_failure = "no attempt made";

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            auto delay = std::chrono::milliseconds(
                static_cast<long long>(opts.backoff_initial_ms) * (1LL << (attempt - 2)));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client client(base);
        auto whole = std::chrono::duration<double>(opts.timeout_seconds);
        auto seconds = std::chrono::duration_cast<std::chrono::seconds>(whole);
        auto micros =
            std::chrono::duration_cast<std::chrono::microseconds>(whole - seconds).count();
        client.set_connection_timeout(static_cast<time_t>(seconds.count()),
                                      static_cast<time_t>(micros));
        client.set_read_timeout(static_cast<time_t>(seconds.count()), static_cast<time_t>(micros));
        client.set_write_timeout(static_cast<time_t>(seconds.count()), static_cast<time_t>(micros));

        httplib::Headers headers;
        if (!opts.bearer_token.empty()) {
            headers.emplace("Authorization", "Bearer " + opts.bearer_token);
        }
        auto res = client.Post(request_path, headers, payload, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        int status = res->status;
        if (status >= 200 && status < 300) {
            return HttpResult{status, res->body, attempt};
        }
        bool retryable = status >= 500 || (status == 429 && opts.retry_on_429);
        if (!retryable) {
            throw ConfigError("HTTP " + std::to_string(status) + " from " + base + request_path +
                              ": " + detail::body_excerpt(res->body));
        }
        last_failure = "HTTP " + std::to_string(status) + ": " + detail::body_excerpt(res->body);
    }
    throw RetryableError("request to " + base + request_path + " failed after " +
                         std::to_string(max_attempts) + " attempts; last failure: " + last_failure);
}

/// Read a bearer token from the named environment variable; empty if unset.
inline std::string read_api_key(const std::string& env_var) {
    if (env_var.empty()) return {};
    const char* value = std::getenv(env_var.c_str());
    return value ? std::string(value) : std::string();
}

} // namespace reactcmg
