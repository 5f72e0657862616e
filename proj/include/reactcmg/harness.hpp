#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "reactcmg/augment.hpp"
#include "reactcmg/corpus.hpp"
#include "reactcmg/embed.hpp"
#include "reactcmg/errors.hpp"
#include "reactcmg/generate.hpp"
#include "reactcmg/hash.hpp"
#include "reactcmg/metrics.hpp"
#include "reactcmg/retriever.hpp"
#include "reactcmg/version.hpp"

namespace reactcmg {

/// Which retrieval variant feeds the generator. Random carries an explicit
/// seed so reruns are reproducible.
struct AblationMode {
    RetrievalMode mode = RetrievalMode::Hybrid;
    std::uint64_t seed = 0;

    std::string label() const {
        if (mode == RetrievalMode::Random) {
            return "random:" + std::to_string(seed);
        }
        return to_string(mode);
    }

    /// Parse "no-retrieval" | "random:SEED" | "bm25" | "dense" | "hybrid".
    static AblationMode parse(const std::string& text) {
        AblationMode out;
        if (text == "no-retrieval" || text == "no_retrieval") {
            out.mode = RetrievalMode::NoRetrieval;
        } else if (text == "bm25" || text == "bm25_only") {
            out.mode = RetrievalMode::Bm25Only;
        } else if (text == "dense" || text == "dense_only" || text == "encoder") {
            out.mode = RetrievalMode::DenseOnly;
        } else if (text == "hybrid") {
            out.mode = RetrievalMode::Hybrid;
        } else if (text.rfind("random", 0) == 0) {
            out.mode = RetrievalMode::Random;
            auto colon = text.find(':');
            if (colon != std::string::npos) {
                try {
                    out.seed = std::stoull(text.substr(colon + 1));
                } catch (const std::exception&) {
                    throw ConfigError("bad random seed in mode \"" + text + "\"");
                }
            } else {
                throw ConfigError("random mode requires an explicit seed, e.g. random:42");
            }
        } else {
            throw ConfigError("unknown mode \"" + text +
                              "\" (expected no-retrieval, random:SEED, bm25, dense or hybrid)");
        }
        return out;
    }
};

/// Everything needed to re-run the experiment exactly (given the same remote
/// model). Key material is never stored, only the env var name.
struct RunManifest {
    std::string test_path;
    std::string test_hash;
    std::string source_path;
    std::string source_hash;
    std::string mode_label;
    nlohmann::json generator_config = nlohmann::json::object();
    std::string template_name;
    std::int64_t timestamp = 0;
    std::string tool_version = kVersion;

    nlohmann::json to_json() const {
        return {{"test_path", test_path},       {"test_hash", test_hash},
                {"source_path", source_path},   {"source_hash", source_hash},
                {"mode", mode_label},           {"generator", generator_config},
                {"template", template_name},    {"timestamp", timestamp},
                {"tool_version", tool_version}};
    }
};

/// One line per test item, in dataset order.
struct EvalRecord {
    std::string query_id;
    std::string exemplar_id; // empty for no_retrieval or failed retrieval
    std::string generated;
    std::string reference;
    double rouge_l = 0.0;
    double meteor = 0.0;
    bool failed = false;

    nlohmann::json to_json() const {
        nlohmann::json obj = {{"query_id", query_id},   {"exemplar_id", exemplar_id},
                              {"generated", generated}, {"reference", reference},
                              {"rouge_l", rouge_l},     {"meteor", meteor}};
        if (failed) obj["failed"] = true;
        return obj;
    }
};

struct SourceDatabase {
    const Corpus* corpus = nullptr;
    const InvertedIndex* index = nullptr;
    const EmbeddingStore* store = nullptr;
    const EmbeddingProvider* provider = nullptr;
};

struct EvalOptions {
    RetrievalOptions retrieval;
    Bm25Params bm25;
    PromptTemplate direct_template = default_direct_template();
    PromptTemplate react_template = default_react_template();
    TokenBudget budget;
    std::size_t concurrency = 4;
    bool bleu_smoothing = false;
    // Manifest inputs; the CLI fills them from the real files.
    std::string test_path_label;
    std::string test_hash;
    std::string source_path_label;
    std::string source_hash;
    nlohmann::json generator_config = nlohmann::json::object();
};

struct EvalOutcome {
    MetricReport report;
    std::vector<EvalRecord> records;
    RunManifest manifest;
};

/// Wall-clock seconds for the manifest; SOURCE_DATE_EPOCH overrides it so
/// reruns can be byte-identical.
inline std::int64_t manifest_timestamp() {
    if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            return std::stoll(fixed);
        } catch (const std::exception&) {
            // fall through to the clock
        }
    }
    return static_cast<std::int64_t>(std::time(nullptr));
}

inline std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return to_hex(fnv1a64(data));
}

/// Run retrieval + augmentation + generation over the test split under one
/// ablation mode and score the results. Failed generations score 0 on every
/// metric and are flagged in their record; the leakage guard is always active.
inline EvalOutcome run_eval(const Corpus& test, const SourceDatabase& source,
                            const AblationMode& mode, const Generator& generator,
                            const EvalOptions& options) {
    if (test.empty()) throw Error("run_eval: test set is empty");
    if (!source.corpus || !source.index || !source.store || !source.provider) {
        throw Error("run_eval: source database is incomplete");
    }

    const std::size_t n = test.size();
    struct ItemPlan {
        AugmentedInput input;
        const DiffMessagePair* exemplar = nullptr;
        bool failed = false;
    };
    std::vector<ItemPlan> plans(n);

    // Retrieval and prompt rendering run sequentially: the random mode draws
    // per-item selections from one seeded stream in dataset order.
    std::mt19937_64 random_stream(mode.seed);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& query = test.at(i);
        ItemPlan& plan = plans[i];
        try {
            if (mode.mode == RetrievalMode::NoRetrieval) {
                plan.input = render_llm_prompt(query.diff_text, nullptr, options.direct_template,
                                               options.budget, query.id);
            } else {
                std::vector<RetrievalCandidate> candidates;
                if (mode.mode == RetrievalMode::Random) {
                    candidates =
                        retrieve_random(query.diff_text, *source.corpus, options.retrieval,
                                        random_stream);
                } else {
                    candidates = retrieve_mode(query.diff_text, *source.index, *source.store,
                                               *source.corpus, *source.provider, options.bm25,
                                               options.retrieval, mode.mode);
                }
                if (candidates.empty()) {
                    plan.failed = true;
                    continue;
                }
                plan.exemplar = &source.corpus->at(candidates.front().ordinal);
                plan.input = render_llm_prompt(query.diff_text, plan.exemplar,
                                               options.react_template, options.budget, query.id);
            }
        } catch (const NoCandidatesError&) {
            plan.failed = true;
        }
    }

    // Generation with bounded concurrency; results land in input order.
    struct ItemResult {
        std::string message;
        bool failed = false;
    };
    std::vector<ItemResult> results(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            if (plans[i].failed) {
                results[i].failed = true;
                continue;
            }
            try {
                GenerationResult gen = generator.generate(plans[i].input, plans[i].exemplar);
                results[i].message = gen.message_text;
            } catch (const RetryableError&) {
                results[i].failed = true;
            }
        }
    };
    std::size_t n_threads = std::max<std::size_t>(1, std::min(options.concurrency, n));
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    EvalOutcome outcome;
    std::vector<std::string> hypotheses(n);
    std::vector<std::string> references(n);
    outcome.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& query = test.at(i);
        EvalRecord& record = outcome.records[i];
        record.query_id = query.id;
        record.exemplar_id = plans[i].exemplar ? plans[i].exemplar->id : "";
        record.reference = query.message_text;
        record.failed = results[i].failed;
        record.generated = results[i].failed ? "" : results[i].message;
        record.rouge_l = record.failed ? 0.0 : rouge_l(record.generated, record.reference);
        record.meteor = record.failed ? 0.0 : meteor(record.generated, record.reference);
        hypotheses[i] = record.generated;
        references[i] = record.reference;
    }

    outcome.report = aggregate(hypotheses, references, mode.label(), options.bleu_smoothing);
    outcome.manifest.test_path = options.test_path_label;
    outcome.manifest.test_hash = options.test_hash;
    outcome.manifest.source_path = options.source_path_label;
    outcome.manifest.source_hash = options.source_hash;
    outcome.manifest.mode_label = mode.label();
    outcome.manifest.generator_config = options.generator_config.empty()
                                            ? nlohmann::json{{"generator", generator.name()}}
                                            : options.generator_config;
    outcome.manifest.template_name =
        mode.mode == RetrievalMode::NoRetrieval ? "direct" : "react";
    outcome.manifest.timestamp = manifest_timestamp();
    return outcome;
}

/// Round-half-up to two decimals. The epsilon absorbs binary representation
/// error so 9.675 renders as "9.68".
inline std::string format_score2(double value) {
    double scaled = std::floor(value * 100.0 + 0.5 + 1e-7);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", scaled / 100.0);
    return buf;
}

struct ComparisonTable {
    std::string text;
    nlohmann::json json;
};

/// Render reports as an aligned text table and as JSON carrying the same
/// 2-decimal numbers, rows in input order.
inline ComparisonTable compare_reports(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw Error("compare_reports: no reports");
    std::size_t label_width = std::string("Approach").size();
    for (const auto& report : reports) {
        label_width = std::max(label_width, report.mode_label.size());
    }
    ComparisonTable table;
    table.json = nlohmann::json::array();
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s\n", static_cast<int>(label_width),
                  "Approach", "BLEU", "Rouge-L", "METEOR");
    table.text = line;
    for (const auto& report : reports) {
        std::string bleu = format_score2(report.bleu4);
        std::string rouge = format_score2(report.rouge_l);
        std::string met = format_score2(report.meteor);
        std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s\n", static_cast<int>(label_width),
                      report.mode_label.c_str(), bleu.c_str(), rouge.c_str(), met.c_str());
        table.text += line;
        table.json.push_back({{"approach", report.mode_label},
                              {"bleu", std::stod(bleu)},
                              {"rouge_l", std::stod(rouge)},
                              {"meteor", std::stod(met)}});
    }
    return table;
}

inline nlohmann::json report_to_json(const MetricReport& report) {
    return {{"mode", report.mode_label},
            {"bleu4", report.bleu4},
            {"rouge_l", report.rouge_l},
            {"meteor", report.meteor},
            {"n_items", report.n_items}};
}

/// Persist a report directory: report.json (reports + manifests + table),
/// records.jsonl (all modes, in run order), table.txt.
inline void write_report_dir(const std::string& dir, const std::vector<EvalOutcome>& outcomes,
                             const ComparisonTable& table) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json report_json;
    report_json["runs"] = nlohmann::json::array();
    for (const auto& outcome : outcomes) {
        report_json["runs"].push_back(
            {{"report", report_to_json(outcome.report)}, {"manifest", outcome.manifest.to_json()}});
    }
    report_json["table"] = table.json;

    std::ofstream report_out(fs::path(dir) / "report.json", std::ios::binary | std::ios::trunc);
    if (!report_out) throw Error("cannot write report.json in " + dir);
    report_out << report_json.dump(2) << '\n';

    std::ofstream records_out(fs::path(dir) / "records.jsonl", std::ios::binary | std::ios::trunc);
    if (!records_out) throw Error("cannot write records.jsonl in " + dir);
    for (const auto& outcome : outcomes) {
        for (const auto& record : outcome.records) {
            nlohmann::json obj = record.to_json();
            obj["mode"] = outcome.report.mode_label;
            records_out << obj.dump() << '\n';
        }
    }

    std::ofstream table_out(fs::path(dir) / "table.txt", std::ios::binary | std::ios::trunc);
    if (!table_out) throw Error("cannot write table.txt in " + dir);
    table_out << table.text;
}

} // namespace reactcmg
