#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "reactcmg/errors.hpp"
#include "reactcmg/text.hpp"

namespace reactcmg {

/// One corpus entry: a code diff, the commit message written for it, and
/// provenance. `extra` holds unknown JSONL keys so round-trips preserve them.
struct DiffMessagePair {
    std::string id;
    std::string repo;
    std::int64_t timestamp = 0; // seconds since epoch, 0 when unknown
    std::string diff_text;
    std::string message_text;
    std::string language_tag;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const DiffMessagePair& other) const {
        return id == other.id && repo == other.repo && timestamp == other.timestamp &&
               diff_text == other.diff_text && message_text == other.message_text &&
               language_tag == other.language_tag && extra == other.extra;
    }
};

/// Ordered, immutable-after-load collection of pairs. Ordinal order is the
/// load order and is stable across runs for the same input.
class Corpus {
public:
    Corpus() = default;

    void add(DiffMessagePair pair) {
        auto [it, inserted] = index_by_id_.emplace(pair.id, entries_.size());
        if (!inserted) {
            throw Error("duplicate id \"" + pair.id + "\" in corpus");
        }
        entries_.push_back(std::move(pair));
    }

    const std::vector<DiffMessagePair>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const DiffMessagePair& at(std::size_t ordinal) const { return entries_.at(ordinal); }

    std::optional<std::size_t> ordinal_of(const std::string& id) const {
        auto it = index_by_id_.find(id);
        if (it == index_by_id_.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const Corpus& other) const { return entries_ == other.entries_; }

private:
    std::vector<DiffMessagePair> entries_;
    std::unordered_map<std::string, std::size_t> index_by_id_;
};

struct FilterConfig {
    std::size_t max_tokens = 1000;       // cap on both diff and message token counts
    std::size_t min_message_tokens = 2;  // floor on message token count
    std::vector<std::string> bot_author_patterns = {"bot", "dependabot"};
    bool drop_empty = true;
};

struct FilterReport {
    std::size_t kept = 0;
    std::size_t dropped_too_long = 0;
    std::size_t dropped_too_short = 0;
    std::size_t dropped_bot = 0;
    std::size_t dropped_empty = 0;

    std::size_t total_dropped() const {
        return dropped_too_long + dropped_too_short + dropped_bot + dropped_empty;
    }
};

struct CorpusStats {
    std::size_t count = 0;
    double avg_message_tokens = 0.0;
    double avg_diff_tokens = 0.0;
};

/// A commit record as extracted from a version-control log. The CLI does the
/// extraction; ingest_git_records is a pure transformation.
struct GitRecord {
    std::string hash;
    std::string author;
    std::int64_t timestamp = 0;
    std::string message;
    std::string diff;
};

namespace detail {

inline std::string json_type_name(const nlohmann::json& v) {
    return std::string(v.type_name());
}

inline DiffMessagePair pair_from_json(const nlohmann::json& obj, std::size_t line_number) {
    auto fail = [line_number](const std::string& why) -> Error {
        return Error("line " + std::to_string(line_number) + ": " + why);
    };
    if (!obj.is_object()) throw fail("expected a JSON object, got " + json_type_name(obj));
    if (!obj.contains("diff")) throw fail("missing required field \"diff\"");
    if (!obj.contains("message")) throw fail("missing required field \"message\"");
    if (!obj["diff"].is_string()) throw fail("field \"diff\" must be a string");
    if (!obj["message"].is_string()) throw fail("field \"message\" must be a string");

    DiffMessagePair pair;
    pair.diff_text = obj["diff"].get<std::string>();
    pair.message_text = obj["message"].get<std::string>();
    if (obj.contains("id")) {
        const auto& id = obj["id"];
        if (id.is_string()) {
            pair.id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            pair.id = std::to_string(id.get<std::int64_t>());
        } else {
            throw fail("field \"id\" must be a string or integer");
        }
    } else {
        pair.id = std::to_string(line_number);
    }
    if (obj.contains("repo")) {
        if (!obj["repo"].is_string()) throw fail("field \"repo\" must be a string");
        pair.repo = obj["repo"].get<std::string>();
    }
    if (obj.contains("timestamp")) {
        if (!obj["timestamp"].is_number_integer()) throw fail("field \"timestamp\" must be an integer");
        pair.timestamp = obj["timestamp"].get<std::int64_t>();
    }
    if (obj.contains("lang")) {
        if (!obj["lang"].is_string()) throw fail("field \"lang\" must be a string");
        pair.language_tag = obj["lang"].get<std::string>();
    }
    for (const auto& [key, value] : obj.items()) {
        if (key == "id" || key == "repo" || key == "timestamp" || key == "lang" ||
            key == "diff" || key == "message") {
            continue;
        }
        pair.extra[key] = value;
    }
    return pair;
}

inline nlohmann::json pair_to_json(const DiffMessagePair& pair) {
    nlohmann::json obj = nlohmann::json::object();
    obj["id"] = pair.id;
    obj["diff"] = pair.diff_text;
    obj["message"] = pair.message_text;
    if (!pair.repo.empty()) obj["repo"] = pair.repo;
    if (pair.timestamp != 0) obj["timestamp"] = pair.timestamp;
    if (!pair.language_tag.empty()) obj["lang"] = pair.language_tag;
    for (const auto& [key, value] : pair.extra.items()) obj[key] = value;
    return obj;
}

inline bool is_blank(const std::string& line) {
    for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r') return false;
    }
    return true;
}

} // namespace detail

/// Parse one JSONL stream into a Corpus. Line numbers are 1-based; malformed
/// lines fail fast with the line number and cause. Blank lines are ignored.
inline Corpus load_jsonl_stream(std::istream& in, const std::string& source_name) {
    Corpus corpus;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (detail::is_blank(line)) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line); // also rejects invalid UTF-8
        } catch (const nlohmann::json::exception& ex) {
            throw Error(source_name + ": line " + std::to_string(line_number) + ": " + ex.what());
        }
        try {
            corpus.add(detail::pair_from_json(obj, line_number));
        } catch (const Error& ex) {
            std::string what = ex.what();
            if (what.rfind("line ", 0) == 0) {
                throw Error(source_name + ": " + what);
            }
            throw Error(source_name + ": line " + std::to_string(line_number) + ": " + what);
        }
    }
    return corpus;
}

inline Corpus load_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus file: " + path);
    return load_jsonl_stream(in, path);
}

inline void write_jsonl_stream(const Corpus& corpus, std::ostream& out) {
    for (const auto& pair : corpus.entries()) {
        out << detail::pair_to_json(pair).dump() << '\n';
    }
}

inline void write_jsonl(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open output file: " + path);
    write_jsonl_stream(corpus, out);
    out.flush();
    if (!out) throw Error("write failed: " + path);
}

/// Map parsed commit records onto a Corpus: id = commit hash, repo and
/// timestamp populated. Duplicate hashes are an error.
inline Corpus ingest_git_records(const std::vector<GitRecord>& records, const std::string& repo) {
    Corpus corpus;
    for (const auto& record : records) {
        if (corpus.ordinal_of(record.hash)) {
            throw Error("duplicate commit hash \"" + record.hash + "\"");
        }
        DiffMessagePair pair;
        pair.id = record.hash;
        pair.repo = repo;
        pair.timestamp = record.timestamp;
        pair.diff_text = record.diff;
        pair.message_text = record.message;
        corpus.add(std::move(pair));
    }
    return corpus;
}

namespace detail {

inline bool matches_bot_pattern(const std::string& author, const std::vector<std::string>& patterns) {
    std::string lowered;
    lowered.reserve(author.size());
    for (unsigned char c : author) lowered.push_back(lower_ascii(c));
    for (const auto& pattern : patterns) {
        std::string p;
        p.reserve(pattern.size());
        for (unsigned char c : pattern) p.push_back(lower_ascii(c));
        if (!p.empty() && lowered.find(p) != std::string::npos) return true;
    }
    return false;
}

} // namespace detail

/// Apply the filtering rules in fixed order (empty, too_long, too_short, bot);
/// an entry failing several rules is counted once under the first. Original
/// order is preserved and filtering never fails.
inline std::pair<Corpus, FilterReport> filter_corpus(
    const Corpus& corpus, const FilterConfig& cfg,
    const std::unordered_map<std::string, std::string>* authors = nullptr) {
    Corpus kept;
    FilterReport report;
    for (const auto& pair : corpus.entries()) {
        if (cfg.drop_empty && (pair.diff_text.empty() || pair.message_text.empty())) {
            ++report.dropped_empty;
            continue;
        }
        std::size_t message_tokens = count_tokens(pair.message_text);
        if (count_tokens(pair.diff_text) > cfg.max_tokens || message_tokens > cfg.max_tokens) {
            ++report.dropped_too_long;
            continue;
        }
        if (message_tokens < cfg.min_message_tokens) {
            ++report.dropped_too_short;
            continue;
        }
        if (authors) {
            auto it = authors->find(pair.id);
            if (it != authors->end() &&
                detail::matches_bot_pattern(it->second, cfg.bot_author_patterns)) {
                ++report.dropped_bot;
                continue;
            }
        }
        kept.add(pair);
        ++report.kept;
    }
    return {std::move(kept), report};
}

inline CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats stats;
    stats.count = corpus.size();
    if (corpus.empty()) return stats;
    double message_total = 0.0;
    double diff_total = 0.0;
    for (const auto& pair : corpus.entries()) {
        message_total += static_cast<double>(count_tokens(pair.message_text));
        diff_total += static_cast<double>(count_tokens(pair.diff_text));
    }
    stats.avg_message_tokens = message_total / static_cast<double>(corpus.size());
    stats.avg_diff_tokens = diff_total / static_cast<double>(corpus.size());
    return stats;
}

} // namespace reactcmg
