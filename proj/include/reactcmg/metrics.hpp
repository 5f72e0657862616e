#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "reactcmg/errors.hpp"
#include "reactcmg/text.hpp"

namespace reactcmg {

/// BLEU-4 / ROUGE-L / METEOR aggregates for one prediction set. All scores
/// are percentages in [0, 100].
struct MetricReport {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
    std::size_t n_items = 0;
    std::string mode_label;
};

namespace detail {

inline std::unordered_map<std::string, std::size_t> ngram_counts(const TokenSequence& tokens,
                                                                 std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            if (j) key.push_back('\x1f');
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

} // namespace detail

/// Corpus-level BLEU-4: modified n-gram precisions from pooled counts with
/// per-reference clipping, geometric mean over n = 1..4, brevity penalty
/// exp(1 - r/c) when c <= r. Any zero precision yields 0 unless add-one
/// smoothing is enabled (applied to the higher-order n-grams). Returns a
/// percentage.
inline double bleu4(const std::vector<std::string>& hypotheses,
                    const std::vector<std::string>& references, bool smoothing = false) {
    if (hypotheses.size() != references.size()) {
        throw Error("bleu4: hypothesis/reference count mismatch");
    }
    if (hypotheses.empty()) throw Error("bleu4: empty input");

    constexpr std::size_t max_n = 4;
    double matches[max_n] = {0, 0, 0, 0};
    double totals[max_n] = {0, 0, 0, 0};
    double hyp_len_total = 0.0;
    double ref_len_total = 0.0;

    for (std::size_t item = 0; item < hypotheses.size(); ++item) {
        TokenSequence hyp = tokenize(hypotheses[item]);
        TokenSequence ref = tokenize(references[item]);
        hyp_len_total += static_cast<double>(hyp.size());
        ref_len_total += static_cast<double>(ref.size());
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto hyp_counts = detail::ngram_counts(hyp, n);
            auto ref_counts = detail::ngram_counts(ref, n);
            for (const auto& [gram, count] : hyp_counts) {
                totals[n - 1] += static_cast<double>(count);
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) {
                    matches[n - 1] += static_cast<double>(std::min(count, it->second));
                }
            }
        }
    }

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        double m = matches[n - 1];
        double t = totals[n - 1];
        double p;
        if (t == 0.0) {
            p = 0.0; // no candidates of this order anywhere in the corpus
        } else if (smoothing && n >= 2) {
            p = (m + 1.0) / (t + 1.0);
        } else {
            p = m / t;
        }
        if (p == 0.0) return 0.0;
        log_sum += std::log(p) / static_cast<double>(max_n);
    }

    double bp = 1.0;
    if (hyp_len_total <= ref_len_total) {
        if (hyp_len_total == 0.0) return 0.0;
        bp = std::exp(1.0 - ref_len_total / hyp_len_total);
    }
    return bp * std::exp(log_sum) * 100.0;
}

/// Sentence-level ROUGE-L F1 over tokenized sequences: L = |LCS|,
/// P = L/|hyp|, R = L/|ref|, F1 = 2PR/(P+R) with the 0-denominator cases
/// pinned to 0.
inline double rouge_l(const std::string& hypothesis, const std::string& reference) {
    TokenSequence hyp = tokenize(hypothesis);
    TokenSequence ref = tokenize(reference);
    if (hyp.empty() || ref.empty()) return 0.0;

    // Classic LCS table with a rolling row.
    std::vector<std::size_t> prev(ref.size() + 1, 0);
    std::vector<std::size_t> curr(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            if (hyp[i - 1] == ref[j - 1]) {
                curr[j] = prev[j - 1] + 1;
            } else {
                curr[j] = std::max(prev[j], curr[j - 1]);
            }
        }
        std::swap(prev, curr);
    }
    double lcs = static_cast<double>(prev[ref.size()]);
    double precision = lcs / static_cast<double>(hyp.size());
    double recall = lcs / static_cast<double>(ref.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

/// Sentence-level METEOR with two alignment stages (exact, then Porter stem),
/// each hypothesis token matching at most one reference token. F_mean uses
/// alpha = 0.9 (recall weighted more); the fragmentation penalty is
/// 0.5 * (chunks/matches)^3.
inline double meteor(const std::string& hypothesis, const std::string& reference) {
    constexpr double alpha = 0.9;
    constexpr double gamma = 0.5;
    constexpr double beta = 3.0;

    TokenSequence hyp = tokenize(hypothesis);
    TokenSequence ref = tokenize(reference);
    if (hyp.empty() || ref.empty()) return 0.0;

    std::vector<std::ptrdiff_t> match_of(hyp.size(), -1); // hyp index -> ref index
    std::vector<bool> ref_used(ref.size(), false);

    // Stage 1: exact token match, first unused reference occurrence.
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && hyp[i] == ref[j]) {
                match_of[i] = static_cast<std::ptrdiff_t>(j);
                ref_used[j] = true;
                break;
            }
        }
    }

    // Stage 2: Porter-stem match on what is still unmatched.
    std::vector<std::string> hyp_stems(hyp.size());
    std::vector<std::string> ref_stems(ref.size());
    for (std::size_t i = 0; i < hyp.size(); ++i) hyp_stems[i] = porter_stem(hyp[i]);
    for (std::size_t j = 0; j < ref.size(); ++j) ref_stems[j] = porter_stem(ref[j]);
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (match_of[i] != -1) continue;
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && hyp_stems[i] == ref_stems[j]) {
                match_of[i] = static_cast<std::ptrdiff_t>(j);
                ref_used[j] = true;
                break;
            }
        }
    }

    std::size_t m = 0;
    for (auto j : match_of) {
        if (j != -1) ++m;
    }
    if (m == 0) return 0.0;

    double precision = static_cast<double>(m) / static_cast<double>(hyp.size());
    double recall = static_cast<double>(m) / static_cast<double>(ref.size());
    double f_mean = precision * recall / (alpha * precision + (1.0 - alpha) * recall);

    // Chunks: maximal runs of matches adjacent in both hypothesis and
    // reference order.
    std::size_t chunks = 0;
    std::ptrdiff_t prev_hyp = -2;
    std::ptrdiff_t prev_ref = -2;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (match_of[i] == -1) continue;
        bool continues = static_cast<std::ptrdiff_t>(i) == prev_hyp + 1 &&
                         match_of[i] == prev_ref + 1;
        if (!continues) ++chunks;
        prev_hyp = static_cast<std::ptrdiff_t>(i);
        prev_ref = match_of[i];
    }

    double penalty =
        gamma * std::pow(static_cast<double>(chunks) / static_cast<double>(m), beta);
    return f_mean * (1.0 - penalty);
}

/// Corpus BLEU plus arithmetic means of the sentence-level scores, x100.
inline MetricReport aggregate(const std::vector<std::string>& hypotheses,
                              const std::vector<std::string>& references,
                              const std::string& mode_label = "", bool bleu_smoothing = false) {
    if (hypotheses.size() != references.size()) {
        throw Error("aggregate: hypothesis/reference count mismatch");
    }
    if (hypotheses.empty()) throw Error("aggregate: empty input");
    MetricReport report;
    report.mode_label = mode_label;
    report.n_items = hypotheses.size();
    report.bleu4 = bleu4(hypotheses, references, bleu_smoothing);
    double rouge_sum = 0.0;
    double meteor_sum = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        rouge_sum += rouge_l(hypotheses[i], references[i]);
        meteor_sum += meteor(hypotheses[i], references[i]);
    }
    report.rouge_l = rouge_sum / static_cast<double>(hypotheses.size()) * 100.0;
    report.meteor = meteor_sum / static_cast<double>(hypotheses.size()) * 100.0;
    return report;
}

} // namespace reactcmg
