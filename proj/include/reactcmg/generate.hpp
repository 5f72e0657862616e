#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "reactcmg/augment.hpp"
#include "reactcmg/corpus.hpp"
#include "reactcmg/errors.hpp"
#include "reactcmg/http.hpp"

namespace reactcmg {

struct GeneratorConfig {
    std::string endpoint_url;                  // base URL; path defaults to /v1/chat/completions
    std::string model_name = "gpt-4o";
    double temperature = 0.0;                  // deterministic by default
    int max_output_tokens = 128;
    double timeout_seconds = 60.0;
    int retries = 2;
    int backoff_initial_ms = 1000;
    std::string api_key_env = "REACT_CMG_API_KEY";
    bool first_line_only = true;
};

struct GenerationResult {
    std::string message_text;         // post-processed first candidate
    std::string raw_response_excerpt; // head of the raw model output
    long long latency_ms = 0;
    int attempts = 1;
};

namespace detail {

inline std::string strip_ws(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (begin < end && is_ws(s[begin])) ++begin;
    while (end > begin && is_ws(s[end - 1])) --end;
    return s.substr(begin, end - begin);
}

inline std::string strip_code_fence(const std::string& s) {
    if (s.size() < 6 || s.rfind("```", 0) != 0 || s.compare(s.size() - 3, 3, "```") != 0) {
        return s;
    }
    std::size_t body_begin = 3;
    // The opening fence line may carry a language tag; drop through its newline.
    std::size_t newline = s.find('\n');
    if (newline != std::string::npos && newline < s.size() - 3) {
        body_begin = newline + 1;
    }
    std::size_t body_end = s.size() - 3;
    // Drop the newline that precedes the closing fence.
    if (body_end > body_begin && s[body_end - 1] == '\n') --body_end;
    if (body_end < body_begin) return s;
    return s.substr(body_begin, body_end - body_begin);
}

inline std::string strip_quote_pair(const std::string& s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

inline std::string first_nonempty_line(const std::string& s) {
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t eol = s.find('\n', start);
        std::string line =
            eol == std::string::npos ? s.substr(start) : s.substr(start, eol - start);
        std::string trimmed = strip_ws(line);
        if (!trimmed.empty()) return trimmed;
        if (eol == std::string::npos) break;
        start = eol + 1;
    }
    return {};
}

} // namespace detail

/// Normalize raw model output: trim whitespace, unwrap code fences and a pair
/// of surrounding quotes, and optionally collapse to the first non-empty line.
/// Applied to a fixpoint so the operation is idempotent.
inline std::string postprocess(const std::string& raw, bool first_line_only = true) {
    std::string current = raw;
    for (int pass = 0; pass < 16; ++pass) {
        std::string next = detail::strip_ws(current);
        next = detail::strip_code_fence(next);
        next = detail::strip_quote_pair(next);
        next = detail::strip_ws(next);
        if (first_line_only) next = detail::first_nonempty_line(next);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

/// Phase III backend. Implementations must be safe to call from several
/// threads at once; batch callers re-assemble results in input order.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string name() const = 0;

    /// Generate a message for the augmented input. `exemplar` is the retrieved
    /// pair when one exists, nullptr otherwise.
    virtual GenerationResult generate(const AugmentedInput& input,
                                      const DiffMessagePair* exemplar) const = 0;
};

/// Chat-completions client. Retries 429/5xx/timeouts with exponential backoff
/// (1s, 2s, 4s, ...) up to cfg.retries; other 4xx raise ConfigError at once.
class ChatGenerator : public Generator {
public:
    explicit ChatGenerator(GeneratorConfig config) : config_(std::move(config)) {
        ParsedUrl url = parse_url(config_.endpoint_url);
        path_ = url.path.empty() || url.path == "/" ? "/v1/chat/completions" : url.path;
        url.path.clear();
        url_ = url;
    }

    std::string name() const override { return "chat:" + config_.model_name; }

    GenerationResult generate(const AugmentedInput& input,
                              const DiffMessagePair* /*exemplar*/) const override {
        if (input.kind != AugmentedInput::Kind::LlmPrompt) {
            throw Error("chat generation requires a rendered prompt input");
        }
        nlohmann::json messages = nlohmann::json::array();
        for (const auto& message : input.messages) {
            messages.push_back({{"role", message.role}, {"content", message.content}});
        }
        nlohmann::json body = {{"model", config_.model_name},
                               {"temperature", config_.temperature},
                               {"max_tokens", config_.max_output_tokens},
                               {"messages", messages}};

        HttpOptions opts;
        opts.timeout_seconds = config_.timeout_seconds;
        opts.retries = config_.retries;
        opts.backoff_initial_ms = config_.backoff_initial_ms;
        opts.retry_on_429 = true;
        opts.bearer_token = read_api_key(config_.api_key_env);

        auto started = std::chrono::steady_clock::now();
        HttpResult http = post_json_with_retries(url_, path_, body, opts);
        auto elapsed = std::chrono::steady_clock::now() - started;

        GenerationResult result;
        result.attempts = http.attempts;
        result.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        std::string raw = extract_content(http.body);
        result.raw_response_excerpt = detail::body_excerpt(raw);
        result.message_text = postprocess(raw, config_.first_line_only);
        return result;
    }

    const GeneratorConfig& config() const { return config_; }

private:
    static std::string extract_content(const std::string& body) {
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(std::string("chat response is not valid JSON: ") + ex.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
            !parsed["choices"][0]["message"].contains("content") ||
            !parsed["choices"][0]["message"]["content"].is_string()) {
            throw ConfigError("chat response missing choices[0].message.content");
        }
        return parsed["choices"][0]["message"]["content"].get<std::string>();
    }

    GeneratorConfig config_;
    ParsedUrl url_;
    std::string path_;
};

/// Deterministic test double that also realizes a retrieval-only baseline:
/// it answers with the exemplar's commit message verbatim, independent of the
/// query. Without an exemplar it produces an empty message.
class MockEchoGenerator : public Generator {
public:
    std::string name() const override { return "mock-echo"; }

    GenerationResult generate(const AugmentedInput& /*input*/,
                              const DiffMessagePair* exemplar) const override {
        GenerationResult result;
        result.message_text = exemplar ? exemplar->message_text : std::string();
        result.raw_response_excerpt = detail::body_excerpt(result.message_text);
        return result;
    }
};

} // namespace reactcmg
