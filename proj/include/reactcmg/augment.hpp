#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "reactcmg/corpus.hpp"
#include "reactcmg/errors.hpp"
#include "reactcmg/text.hpp"

namespace reactcmg {

inline constexpr const char* kQueryMarker = "[QUERY]";
inline constexpr const char* kDiffMarker = "[DIFF]";
inline constexpr const char* kMsgMarker = "[MSG]";
inline constexpr const char* kTruncationMarker = "…[truncated]";

struct ChatMessage {
    std::string role; // "system" or "user"
    std::string content;
};

/// Model-ready input: either the special-token concatenation consumed by
/// fine-tuned models or a rendered chat prompt. Exactly one side is populated.
struct AugmentedInput {
    enum class Kind { PlmConcat, LlmPrompt };

    Kind kind = Kind::PlmConcat;
    std::string plm_text;
    std::vector<ChatMessage> messages;
    std::string query_id;
    std::string exemplar_id;
};

/// Prompt template with `{query_diff}`, `{retrieved_diff}`, `{retrieved_msg}`
/// placeholders. The react flavor uses all three exactly once; direct uses
/// only `{query_diff}`.
struct PromptTemplate {
    enum class Name { Direct, React };

    Name name = Name::Direct;
    std::string system_text;
    std::string user_text;
};

struct TokenBudget {
    std::size_t max_total = 3500;
    // Fixed truncation order: retrieved_diff first (its message carries the
    // style signal), then query_diff, then retrieved_msg.
};

namespace detail {

inline constexpr const char* kPlaceholderQueryDiff = "{query_diff}";
inline constexpr const char* kPlaceholderRetrievedDiff = "{retrieved_diff}";
inline constexpr const char* kPlaceholderRetrievedMsg = "{retrieved_msg}";

inline std::size_t count_occurrences(const std::string& haystack, std::string_view needle) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

inline void check_no_markers(const std::string& text, const std::string& field) {
    for (const char* marker : {kQueryMarker, kDiffMarker, kMsgMarker}) {
        if (text.find(marker) != std::string::npos) {
            throw MarkerCollisionError(field + " contains the reserved marker " + marker);
        }
    }
}

// Substitute placeholders in a single pass; inserted values are never
// re-scanned, so placeholder-looking text inside a diff stays literal.
inline std::string substitute_placeholders(const std::string& tmpl,
                                           const std::vector<std::pair<std::string_view, const std::string*>>& subs) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        std::size_t best = std::string::npos;
        std::size_t best_sub = 0;
        for (std::size_t s = 0; s < subs.size(); ++s) {
            std::size_t found = tmpl.find(subs[s].first, pos);
            if (found < best) {
                best = found;
                best_sub = s;
            }
        }
        if (best == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, best - pos);
        out.append(*subs[best_sub].second);
        pos = best + subs[best_sub].first.size();
    }
    return out;
}

} // namespace detail

/// Validate the placeholder contract for a template.
inline void validate_template(const PromptTemplate& tmpl) {
    std::string combined = tmpl.system_text + "\n" + tmpl.user_text;
    std::size_t q = detail::count_occurrences(combined, detail::kPlaceholderQueryDiff);
    std::size_t d = detail::count_occurrences(combined, detail::kPlaceholderRetrievedDiff);
    std::size_t m = detail::count_occurrences(combined, detail::kPlaceholderRetrievedMsg);
    if (tmpl.name == PromptTemplate::Name::React) {
        if (q != 1 || d != 1 || m != 1) {
            throw ConfigError("react template must contain {query_diff}, {retrieved_diff} and "
                              "{retrieved_msg} exactly once each");
        }
    } else {
        if (q != 1 || d != 0 || m != 0) {
            throw ConfigError("direct template must contain {query_diff} exactly once and no "
                              "exemplar placeholders");
        }
    }
}

inline PromptTemplate default_direct_template() {
    PromptTemplate tmpl;
    tmpl.name = PromptTemplate::Name::Direct;
    tmpl.system_text =
        "You are an expert software developer. Write a concise commit message for the given "
        "code diff. Output only the commit message.";
    tmpl.user_text =
        "Write a commit message for this diff:\n"
        "{query_diff}\n";
    return tmpl;
}

inline PromptTemplate default_react_template() {
    PromptTemplate tmpl;
    tmpl.name = PromptTemplate::Name::React;
    tmpl.system_text =
        "You are an expert software developer. Write a concise commit message for the given "
        "code diff. Output only the commit message.";
    tmpl.user_text =
        "Here is a similar code diff and its commit message as an example.\n"
        "\n"
        "Example diff:\n"
        "{retrieved_diff}\n"
        "\n"
        "Example commit message:\n"
        "{retrieved_msg}\n"
        "\n"
        "Write a commit message for this diff:\n"
        "{query_diff}\n";
    return tmpl;
}

/// Template files are plain text: the system message, a line containing only
/// `---`, then the user message.
inline PromptTemplate load_template_file(const std::string& path, PromptTemplate::Name name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open template file: " + path);
    PromptTemplate tmpl;
    tmpl.name = name;
    std::string line;
    bool past_separator = false;
    std::string system_text;
    std::string user_text;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!past_separator && line == "---") {
            past_separator = true;
            continue;
        }
        (past_separator ? user_text : system_text).append(line).push_back('\n');
    }
    if (!past_separator) {
        throw ConfigError("template file " + path + " is missing the `---` separator line");
    }
    // Drop the trailing newline the loop added after the last line.
    if (!system_text.empty()) system_text.pop_back();
    if (!user_text.empty()) user_text.pop_back();
    tmpl.system_text = system_text;
    tmpl.user_text = user_text;
    validate_template(tmpl);
    return tmpl;
}

/// Phase II for fine-tuned models: the literal special-token concatenation
/// [QUERY]<query diff>[DIFF]<retrieved diff>[MSG]<retrieved msg>. Inputs
/// containing a literal marker are rejected so the format stays parseable.
inline AugmentedInput concat_plm(const std::string& query_diff, const DiffMessagePair& exemplar,
                                 const std::string& query_id = "") {
    detail::check_no_markers(query_diff, "query diff");
    detail::check_no_markers(exemplar.diff_text, "exemplar diff");
    detail::check_no_markers(exemplar.message_text, "exemplar message");
    AugmentedInput out;
    out.kind = AugmentedInput::Kind::PlmConcat;
    out.plm_text = std::string(kQueryMarker) + query_diff + kDiffMarker + exemplar.diff_text +
                   kMsgMarker + exemplar.message_text;
    out.query_id = query_id;
    out.exemplar_id = exemplar.id;
    return out;
}

namespace detail {

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;

    std::size_t total_tokens() const {
        return count_tokens(system_text) + count_tokens(user_text);
    }
};

inline RenderedPrompt render_once(const PromptTemplate& tmpl, const std::string& query_diff,
                                  const std::string& retrieved_diff,
                                  const std::string& retrieved_msg) {
    std::vector<std::pair<std::string_view, const std::string*>> subs = {
        {kPlaceholderQueryDiff, &query_diff},
        {kPlaceholderRetrievedDiff, &retrieved_diff},
        {kPlaceholderRetrievedMsg, &retrieved_msg},
    };
    RenderedPrompt out;
    out.system_text = substitute_placeholders(tmpl.system_text, subs);
    out.user_text = substitute_placeholders(tmpl.user_text, subs);
    return out;
}

inline std::string truncated_field(const std::string& original, std::size_t keep_tokens) {
    std::string prefix = truncate_to_tokens(original, keep_tokens);
    if (prefix.empty()) return kTruncationMarker;
    return prefix + "\n" + kTruncationMarker;
}

} // namespace detail

/// Render the chat prompt, enforcing the token budget by tail-truncating
/// fields in the fixed order retrieved_diff, query_diff, retrieved_msg (a
/// truncated field gets the literal line `…[truncated]` appended). Throws
/// BudgetError when the budget cannot be met even with every truncatable
/// field emptied.
inline AugmentedInput render_llm_prompt(const std::string& query_diff,
                                        const DiffMessagePair* exemplar,
                                        const PromptTemplate& tmpl, const TokenBudget& budget,
                                        const std::string& query_id = "") {
    validate_template(tmpl);
    if (tmpl.name == PromptTemplate::Name::React && exemplar == nullptr) {
        throw Error("react template requires an exemplar");
    }
    if (tmpl.name == PromptTemplate::Name::Direct && exemplar != nullptr) {
        throw Error("direct template takes no exemplar");
    }

    std::string fields[3] = {
        exemplar ? exemplar->diff_text : std::string(),    // retrieved_diff
        query_diff,                                        // query_diff
        exemplar ? exemplar->message_text : std::string(), // retrieved_msg
    };

    auto render = [&tmpl, &fields]() {
        return detail::render_once(tmpl, fields[1], fields[0], fields[2]);
    };

    detail::RenderedPrompt rendered = render();
    const std::size_t marker_tokens = count_tokens(kTruncationMarker);
    for (std::size_t f = 0; f < 3 && rendered.total_tokens() > budget.max_total; ++f) {
        const std::string original = fields[f];
        std::size_t original_tokens = count_tokens(original);
        // A truncated field carries keep + marker tokens, so truncation can
        // only shrink fields longer than the marker itself.
        if (original_tokens <= marker_tokens) continue;
        // Largest keep in [0, tokens-1] that fits; token counts are monotone
        // in the kept prefix, so binary search applies.
        std::size_t lo = 0;
        std::size_t hi = original_tokens - 1;
        std::size_t best = 0;
        while (lo <= hi) {
            std::size_t mid = lo + (hi - lo) / 2;
            fields[f] = detail::truncated_field(original, mid);
            if (render().total_tokens() <= budget.max_total) {
                best = mid;
                lo = mid + 1;
            } else {
                if (mid == 0) break;
                hi = mid - 1;
            }
        }
        fields[f] = detail::truncated_field(original, best);
        rendered = render();
    }
    if (rendered.total_tokens() > budget.max_total) {
        throw BudgetError("prompt exceeds the token budget (" +
                          std::to_string(rendered.total_tokens()) + " > " +
                          std::to_string(budget.max_total) +
                          ") even with every truncatable field emptied");
    }

    AugmentedInput out;
    out.kind = AugmentedInput::Kind::LlmPrompt;
    out.messages = {{"system", rendered.system_text}, {"user", rendered.user_text}};
    out.query_id = query_id;
    out.exemplar_id = exemplar ? exemplar->id : "";
    return out;
}

/// Write the fine-tuning dataset: one JSONL line per (query, exemplar) pair
/// with the PLM concatenation as input and the query's own message as target.
/// Returns the number of lines written.
inline std::size_t export_finetune_dataset(
    const std::vector<std::pair<DiffMessagePair, DiffMessagePair>>& corpus_with_exemplars,
    const std::string& out_path) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open fine-tune output file: " + out_path);
    std::size_t written = 0;
    for (const auto& [query, exemplar] : corpus_with_exemplars) {
        AugmentedInput input = concat_plm(query.diff_text, exemplar, query.id);
        nlohmann::json line = {{"input", input.plm_text}, {"target", query.message_text}};
        out << line.dump() << '\n';
        ++written;
    }
    out.flush();
    if (!out) throw Error("write failed: " + out_path);
    return written;
}

} // namespace reactcmg
