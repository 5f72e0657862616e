#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "reactcmg/corpus.hpp"
#include "reactcmg/embed.hpp"
#include "reactcmg/errors.hpp"
#include "reactcmg/text.hpp"

namespace reactcmg {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct HybridWeights {
    double w_lex = 1.0;
    double w_sem = 1.0;
};

/// A scored retrieval candidate. hybrid is the weighted mean of the two
/// min-max normalized scores.
struct RetrievalCandidate {
    std::string id;
    std::size_t ordinal = 0;
    double bm25_raw = 0.0;
    double cosine_raw = 0.0;
    double bm25_norm = 0.0;
    double cosine_norm = 0.0;
    double hybrid = 0.0;
};

struct RetrievalOptions {
    std::size_t k = 1;
    bool exclude_exact = true;            // leakage guard
    std::optional<std::string> project_filter;
    std::optional<std::int64_t> before_timestamp;
    std::size_t pool_size = 64;           // candidate pool per retriever; 0 = full scan
};

/// Bag-of-words index over diff_text. Postings are (ordinal, term frequency)
/// sorted by ordinal; construction is deterministic for a given corpus.
class InvertedIndex {
public:
    InvertedIndex() = default;

    static InvertedIndex build(const Corpus& corpus) {
        InvertedIndex index;
        index.doc_ids_.reserve(corpus.size());
        index.doc_lengths_.reserve(corpus.size());
        for (std::size_t ordinal = 0; ordinal < corpus.size(); ++ordinal) {
            const auto& pair = corpus.at(ordinal);
            TokenSequence tokens = tokenize(pair.diff_text);
            index.doc_ids_.push_back(pair.id);
            index.doc_lengths_.push_back(tokens.size());
            std::map<std::string, std::uint32_t> counts;
            for (auto& token : tokens) ++counts[token];
            for (auto& [term, tf] : counts) {
                index.postings_[term].emplace_back(ordinal, tf);
            }
        }
        double total = 0.0;
        for (std::size_t len : index.doc_lengths_) total += static_cast<double>(len);
        index.avgdl_ = index.doc_lengths_.empty()
                           ? 0.0
                           : total / static_cast<double>(index.doc_lengths_.size());
        return index;
    }

    std::size_t doc_count() const { return doc_lengths_.size(); }
    double avgdl() const { return avgdl_; }
    std::size_t doc_length(std::size_t ordinal) const { return doc_lengths_.at(ordinal); }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    std::size_t document_frequency(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? 0 : it->second.size();
    }

    std::uint32_t term_frequency(const std::string& term, std::size_t ordinal) const {
        auto it = postings_.find(term);
        if (it == postings_.end()) return 0;
        const auto& list = it->second;
        auto pos = std::lower_bound(
            list.begin(), list.end(), ordinal,
            [](const auto& entry, std::size_t value) { return entry.first < value; });
        if (pos == list.end() || pos->first != ordinal) return 0;
        return pos->second;
    }

    const std::vector<std::pair<std::size_t, std::uint32_t>>* postings(
        const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open index for writing: " + path);
        nlohmann::json header = {{"format", "react-cmg-idx"},
                                 {"version", 1},
                                 {"n", doc_count()},
                                 {"avgdl", avgdl_}};
        out << header.dump() << '\n';
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
            nlohmann::json doc = {{"ordinal", i}, {"id", doc_ids_[i]}, {"len", doc_lengths_[i]}};
            out << doc.dump() << '\n';
        }
        // std::map keeps terms sorted, so the term section is byte-stable.
        for (const auto& [term, list] : postings_) {
            nlohmann::json entry = {{"t", term}, {"p", nlohmann::json::array()}};
            for (const auto& [ordinal, tf] : list) {
                entry["p"].push_back(nlohmann::json::array({ordinal, tf}));
            }
            out << entry.dump() << '\n';
        }
        out.flush();
        if (!out) throw Error("write failed: " + path);
    }

    static InvertedIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open index: " + path);
        std::string line;
        if (!std::getline(in, line)) throw Error("index file is empty: " + path);
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw Error(path + ": bad index header: " + ex.what());
        }
        if (header.value("format", "") != "react-cmg-idx") {
            throw Error(path + ": not an index file (missing magic)");
        }
        if (header.value("version", 0) != 1) throw Error(path + ": unsupported index version");
        InvertedIndex index;
        index.avgdl_ = header.value("avgdl", 0.0);
        std::size_t n = header.value("n", std::size_t{0});
        index.doc_ids_.resize(n);
        index.doc_lengths_.resize(n);
        std::size_t line_number = 1;
        while (std::getline(in, line)) {
            ++line_number;
            if (detail::is_blank(line)) continue;
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& ex) {
                throw Error(path + ": line " + std::to_string(line_number) + ": " + ex.what());
            }
            if (obj.contains("ordinal")) {
                std::size_t ordinal = obj.at("ordinal").get<std::size_t>();
                if (ordinal >= n) throw Error(path + ": ordinal out of range");
                index.doc_ids_[ordinal] = obj.at("id").get<std::string>();
                index.doc_lengths_[ordinal] = obj.at("len").get<std::size_t>();
            } else {
                auto& list = index.postings_[obj.at("t").get<std::string>()];
                for (const auto& p : obj.at("p")) {
                    list.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::uint32_t>());
                }
            }
        }
        return index;
    }

private:
    std::map<std::string, std::vector<std::pair<std::size_t, std::uint32_t>>> postings_;
    std::vector<std::size_t> doc_lengths_;
    std::vector<std::string> doc_ids_;
    double avgdl_ = 0.0;
};

/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
inline double bm25_idf(std::size_t n_docs, std::size_t df) {
    double n = static_cast<double>(n_docs);
    double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

/// BM25 score of one document for a tokenized query: sum over unique query
/// terms of idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)). Terms absent
/// from the document contribute 0.
inline double bm25_score(const InvertedIndex& index, const Bm25Params& params,
                         const TokenSequence& query_tokens, std::size_t ordinal) {
    if (ordinal >= index.doc_count()) {
        throw Error("bm25_score: ordinal " + std::to_string(ordinal) + " out of range");
    }
    std::vector<std::string> unique_terms(query_tokens.begin(), query_tokens.end());
    std::sort(unique_terms.begin(), unique_terms.end());
    unique_terms.erase(std::unique(unique_terms.begin(), unique_terms.end()), unique_terms.end());

    double dl = static_cast<double>(index.doc_length(ordinal));
    double score = 0.0;
    for (const auto& term : unique_terms) {
        std::uint32_t tf = index.term_frequency(term, ordinal);
        if (tf == 0) continue;
        std::size_t df = index.document_frequency(term);
        double tf_d = static_cast<double>(tf);
        double denom = tf_d + params.k1 * (1.0 - params.b + params.b * dl / index.avgdl());
        score += bm25_idf(index.doc_count(), df) * tf_d * (params.k1 + 1.0) / denom;
    }
    return score;
}

/// Min-max normalize into [0,1] over the given pool; a constant pool maps to
/// all zeros so that a degenerate retriever contributes nothing to the fusion.
inline std::vector<double> min_max_normalize(const std::vector<double>& values) {
    if (values.empty()) return {};
    double lo = values[0];
    double hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(values.size(), 0.0);
    if (hi == lo) return out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - lo) / (hi - lo);
    }
    return out;
}

/// Weighted mean of the normalized scores.
inline double hybrid_score(double bm25_norm, double cosine_norm, const HybridWeights& weights) {
    if (weights.w_lex < 0.0 || weights.w_sem < 0.0 || weights.w_lex + weights.w_sem <= 0.0) {
        throw Error("hybrid weights must be non-negative with a positive sum");
    }
    return (weights.w_lex * bm25_norm + weights.w_sem * cosine_norm) /
           (weights.w_lex + weights.w_sem);
}

namespace detail {

// Trailing whitespace is trimmed per line before the byte comparison used by
// the leakage guard.
inline std::string trim_trailing_ws_per_line(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t eol = text.find('\n', start);
        std::string_view line = eol == std::string_view::npos
                                    ? text.substr(start)
                                    : text.substr(start, eol - start);
        std::size_t end = line.size();
        while (end > 0 && (line[end - 1] == ' ' || line[end - 1] == '\t' || line[end - 1] == '\r')) {
            --end;
        }
        out.append(line.substr(0, end));
        if (eol == std::string_view::npos) break;
        out.push_back('\n');
        start = eol + 1;
    }
    return out;
}

inline bool same_diff(const std::string& a, const std::string& b) {
    return trim_trailing_ws_per_line(a) == trim_trailing_ws_per_line(b);
}

// Ordinals passing the project / temporal restrictions, ascending.
inline std::vector<std::size_t> eligible_ordinals(const Corpus& corpus,
                                                  const RetrievalOptions& options) {
    std::vector<std::size_t> out;
    out.reserve(corpus.size());
    for (std::size_t ordinal = 0; ordinal < corpus.size(); ++ordinal) {
        const auto& pair = corpus.at(ordinal);
        if (options.project_filter && pair.repo != *options.project_filter) continue;
        if (options.before_timestamp && pair.timestamp >= *options.before_timestamp) continue;
        out.push_back(ordinal);
    }
    return out;
}

// Indices of the top `limit` scores, ties broken by lower position.
inline std::vector<std::size_t> top_indices(const std::vector<double>& scores, std::size_t limit) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    if (order.size() > limit) order.resize(limit);
    return order;
}

} // namespace detail

/// Sort candidates by hybrid score descending, ties broken by lower ordinal.
inline void rank_candidates(std::vector<RetrievalCandidate>& candidates) {
    std::sort(candidates.begin(), candidates.end(),
              [](const RetrievalCandidate& a, const RetrievalCandidate& b) {
                  if (a.hybrid != b.hybrid) return a.hybrid > b.hybrid;
                  return a.ordinal < b.ordinal;
              });
}

/// Drop every candidate whose diff equals the query byte-for-byte after
/// per-line trailing-whitespace trimming, promoting the next candidate.
inline void apply_leakage_guard(std::vector<RetrievalCandidate>& ranked, const Corpus& corpus,
                                const std::string& query_diff) {
    ranked.erase(std::remove_if(ranked.begin(), ranked.end(),
                                [&](const RetrievalCandidate& c) {
                                    return detail::same_diff(corpus.at(c.ordinal).diff_text,
                                                             query_diff);
                                }),
                 ranked.end());
}

/// Phase I: score the eligible pool with BM25 and embedding cosine, min-max
/// normalize each over the pool, fuse with the given weights, rank, apply the
/// leakage guard, and return the top k survivors.
inline std::vector<RetrievalCandidate> retrieve(const std::string& query_diff,
                                                const InvertedIndex& index,
                                                const EmbeddingStore& store, const Corpus& corpus,
                                                const EmbeddingProvider& provider,
                                                const Bm25Params& params,
                                                const HybridWeights& weights,
                                                const RetrievalOptions& options) {
    if (options.k < 1) throw Error("retrieval options: k must be >= 1");
    if (options.pool_size != 0 && options.pool_size < options.k + 1) {
        throw Error("retrieval options: pool_size must be 0 (full scan) or >= k+1");
    }
    std::vector<std::size_t> eligible = detail::eligible_ordinals(corpus, options);
    if (eligible.empty()) {
        throw NoCandidatesError("no candidates: the project/time filters removed every document");
    }

    TokenSequence query_tokens = tokenize(query_diff);
    EmbeddingVector query_vec = provider.embed(query_diff);

    std::vector<double> bm25_all(eligible.size(), 0.0);
    std::vector<double> cosine_all(eligible.size(), 0.0);
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        std::size_t ordinal = eligible[i];
        bm25_all[i] = bm25_score(index, params, query_tokens, ordinal);
        const EmbeddingVector* doc_vec = store.find(corpus.at(ordinal).id);
        if (!doc_vec) {
            throw Error("embedding store has no vector for id \"" + corpus.at(ordinal).id + "\"");
        }
        cosine_all[i] = cosine(query_vec, *doc_vec);
    }

    // Candidate pool: union of the per-retriever top lists (or everything).
    std::vector<std::size_t> pool_positions;
    if (options.pool_size == 0 || eligible.size() <= options.pool_size) {
        pool_positions.resize(eligible.size());
        for (std::size_t i = 0; i < pool_positions.size(); ++i) pool_positions[i] = i;
    } else {
        std::vector<bool> in_pool(eligible.size(), false);
        for (std::size_t i : detail::top_indices(bm25_all, options.pool_size)) in_pool[i] = true;
        for (std::size_t i : detail::top_indices(cosine_all, options.pool_size)) in_pool[i] = true;
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            if (in_pool[i]) pool_positions.push_back(i);
        }
    }

    std::vector<double> bm25_pool(pool_positions.size());
    std::vector<double> cosine_pool(pool_positions.size());
    for (std::size_t i = 0; i < pool_positions.size(); ++i) {
        bm25_pool[i] = bm25_all[pool_positions[i]];
        cosine_pool[i] = cosine_all[pool_positions[i]];
    }
    std::vector<double> bm25_norm = min_max_normalize(bm25_pool);
    std::vector<double> cosine_norm = min_max_normalize(cosine_pool);

    std::vector<RetrievalCandidate> candidates(pool_positions.size());
    for (std::size_t i = 0; i < pool_positions.size(); ++i) {
        std::size_t ordinal = eligible[pool_positions[i]];
        RetrievalCandidate& c = candidates[i];
        c.id = corpus.at(ordinal).id;
        c.ordinal = ordinal;
        c.bm25_raw = bm25_pool[i];
        c.cosine_raw = cosine_pool[i];
        c.bm25_norm = bm25_norm[i];
        c.cosine_norm = cosine_norm[i];
        c.hybrid = hybrid_score(c.bm25_norm, c.cosine_norm, weights);
    }
    rank_candidates(candidates);
    if (options.exclude_exact) apply_leakage_guard(candidates, corpus, query_diff);
    if (candidates.size() > options.k) candidates.resize(options.k);
    return candidates;
}

enum class RetrievalMode { Hybrid, Bm25Only, DenseOnly, Random, NoRetrieval };

inline std::string to_string(RetrievalMode mode) {
    switch (mode) {
        case RetrievalMode::Hybrid: return "hybrid";
        case RetrievalMode::Bm25Only: return "bm25_only";
        case RetrievalMode::DenseOnly: return "dense_only";
        case RetrievalMode::Random: return "random";
        case RetrievalMode::NoRetrieval: return "no_retrieval";
    }
    return "unknown";
}

/// Draw k distinct candidates uniformly from the eligible pool, still honoring
/// the leakage guard. Uses an explicit Fisher-Yates shuffle with modulo draws
/// so the selection is identical across platforms for a given stream state.
inline std::vector<RetrievalCandidate> retrieve_random(const std::string& query_diff,
                                                       const Corpus& corpus,
                                                       const RetrievalOptions& options,
                                                       std::mt19937_64& rng) {
    std::vector<std::size_t> eligible = detail::eligible_ordinals(corpus, options);
    if (eligible.empty()) {
        throw NoCandidatesError("no candidates: the project/time filters removed every document");
    }
    for (std::size_t i = eligible.size(); i > 1; --i) {
        std::size_t pick = static_cast<std::size_t>(rng() % i);
        std::swap(eligible[i - 1], eligible[pick]);
    }
    std::vector<RetrievalCandidate> out;
    for (std::size_t ordinal : eligible) {
        if (out.size() >= options.k) break;
        if (options.exclude_exact &&
            detail::same_diff(corpus.at(ordinal).diff_text, query_diff)) {
            continue;
        }
        RetrievalCandidate c;
        c.id = corpus.at(ordinal).id;
        c.ordinal = ordinal;
        out.push_back(std::move(c));
    }
    return out;
}

/// Ablation-mode dispatch: bm25_only and dense_only are weight settings of the
/// hybrid path; random draws from a stream seeded with `seed`.
inline std::vector<RetrievalCandidate> retrieve_mode(
    const std::string& query_diff, const InvertedIndex& index, const EmbeddingStore& store,
    const Corpus& corpus, const EmbeddingProvider& provider, const Bm25Params& params,
    const RetrievalOptions& options, RetrievalMode mode, std::uint64_t seed = 0) {
    switch (mode) {
        case RetrievalMode::Hybrid:
            return retrieve(query_diff, index, store, corpus, provider, params,
                            HybridWeights{1.0, 1.0}, options);
        case RetrievalMode::Bm25Only:
            return retrieve(query_diff, index, store, corpus, provider, params,
                            HybridWeights{1.0, 0.0}, options);
        case RetrievalMode::DenseOnly:
            return retrieve(query_diff, index, store, corpus, provider, params,
                            HybridWeights{0.0, 1.0}, options);
        case RetrievalMode::Random: {
            std::mt19937_64 rng(seed);
            return retrieve_random(query_diff, corpus, options, rng);
        }
        case RetrievalMode::NoRetrieval:
            return {};
    }
    throw Error("unknown retrieval mode");
}

} // namespace reactcmg
