#pragma once

#include <reactcmg/corpus.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

/// Deterministic desk-scale dataset: every test query is a token-level
/// perturbation of one source diff and its reference message is that source's
/// message, so a retriever that finds the right source lets the echo
/// generator reproduce the reference.
struct SyntheticDataset {
    reactcmg::Corpus source;
    reactcmg::Corpus test;
};

inline SyntheticDataset make_synthetic(std::size_t n_source = 200, std::size_t n_test = 50,
                                       std::uint64_t seed = 13) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> vocab;
    vocab.reserve(400);
    for (int i = 0; i < 400; ++i) vocab.push_back("w" + std::to_string(i));
    const std::vector<std::string> verbs = {"update", "refactor", "simplify", "extend", "guard"};
    const std::vector<std::string> repos = {"org/alpha", "org/beta", "org/gamma"};

    SyntheticDataset data;
    std::vector<std::vector<std::string>> source_tokens(n_source);
    for (std::size_t i = 0; i < n_source; ++i) {
        std::vector<std::string>& tokens = source_tokens[i];
        std::size_t len = 24 + rng() % 12;
        for (std::size_t t = 0; t < len; ++t) {
            tokens.push_back(vocab[rng() % vocab.size()]);
        }
        // A couple of entry-specific tokens so each diff has rare terms.
        tokens.push_back("file_" + std::to_string(i));
        tokens.push_back("symbol_" + std::to_string(i));

        std::string diff;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            diff += (t % 8 == 0) ? (t ? "\n+ " : "+ ") : " ";
            diff += tokens[t];
        }
        reactcmg::DiffMessagePair pair;
        pair.id = "s" + std::to_string(i);
        pair.repo = repos[i % repos.size()];
        pair.timestamp = 1500000000 + static_cast<std::int64_t>(i) * 1000;
        pair.diff_text = diff;
        pair.message_text = verbs[i % verbs.size()] + " module_" + std::to_string(i) +
                            " handler for case_" + std::to_string(i);
        data.source.add(std::move(pair));
    }

    for (std::size_t j = 0; j < n_test; ++j) {
        std::size_t pick = (j * 7 + 3) % n_source;
        std::vector<std::string> tokens = source_tokens[pick];
        // Perturb roughly 15% of the tokens.
        std::size_t flips = std::max<std::size_t>(1, tokens.size() * 15 / 100);
        for (std::size_t f = 0; f < flips; ++f) {
            tokens[rng() % tokens.size()] = vocab[rng() % vocab.size()];
        }
        std::string diff;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            diff += (t % 8 == 0) ? (t ? "\n+ " : "+ ") : " ";
            diff += tokens[t];
        }
        reactcmg::DiffMessagePair pair;
        pair.id = "q" + std::to_string(j);
        pair.repo = data.source.at(pick).repo;
        pair.timestamp = 1600000000 + static_cast<std::int64_t>(j);
        pair.diff_text = diff;
        pair.message_text = data.source.at(pick).message_text;
        data.test.add(std::move(pair));
    }
    return data;
}

} // namespace testsupport
