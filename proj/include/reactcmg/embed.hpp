#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "reactcmg/corpus.hpp"
#include "reactcmg/errors.hpp"
#include "reactcmg/hash.hpp"
#include "reactcmg/http.hpp"
#include "reactcmg/text.hpp"

namespace reactcmg {

inline constexpr std::size_t kEmbeddingDim = 256;

/// Fixed 256-dimensional dense representation of a diff. Unit L2 norm except
/// for the all-zero vector produced for empty text.
struct EmbeddingVector {
    std::vector<double> values = std::vector<double>(kEmbeddingDim, 0.0);
    std::string provider_tag;

    double norm() const {
        double sum = 0.0;
        for (double v : values) sum += v * v;
        return std::sqrt(sum);
    }
};

inline double l2_norm(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

/// Scale to unit norm; the zero vector stays zero.
inline void l2_normalize(std::vector<double>& values) {
    double n = l2_norm(values);
    if (n == 0.0) return;
    for (double& v : values) v /= n;
}

/// dot(a,b) / (|a||b|); 0.0 when either norm is zero.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    double na = l2_norm(a);
    double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (na * nb);
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine(a.values, b.values);
}

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
    virtual std::string tag() const = 0;
};

/// Deterministic offline stand-in for an encoder: signed feature hashing of
/// token frequencies into 256 buckets. Each token is hashed with FNV-1a
/// (seed 0); bucket = hash mod 256; sign is +1 when bit 63 of the hash is 0,
/// -1 otherwise; the accumulated vector is L2-normalized. Texts with higher
/// lexical overlap land closer in cosine, which is what retrieval fusion needs.
class LocalHashEmbedder : public EmbeddingProvider {
public:
    EmbeddingVector embed(const std::string& text) const override {
        EmbeddingVector vec;
        vec.provider_tag = tag();
        for (const auto& token : tokenize(text)) {
            std::uint64_t h = fnv1a64(token, 0);
            std::size_t bucket = static_cast<std::size_t>(h % kEmbeddingDim);
            double sign = (h >> 63) ? -1.0 : 1.0;
            vec.values[bucket] += sign;
        }
        l2_normalize(vec.values);
        return vec;
    }

    std::string tag() const override { return "local-hash-v1"; }
};

struct EmbeddingEndpointConfig {
    std::string endpoint_url;                      // base URL; path defaults to /v1/embeddings
    std::string model_name = "code-embedder";
    double timeout_seconds = 60.0;
    int retries = 2;
    int backoff_initial_ms = 1000;
    std::string api_key_env = "REACT_CMG_API_KEY";
};

/// Embedding client speaking the standard embeddings wire format:
/// POST {"model": m, "input": [text]} -> {"data":[{"embedding":[...]}]}.
/// Responses with a dimension other than 256 are truncated/zero-padded and
/// re-normalized, and a warning is recorded.
class RemoteEmbedder : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(EmbeddingEndpointConfig config) : config_(std::move(config)) {
        ParsedUrl url = parse_url(config_.endpoint_url);
        path_ = url.path.empty() || url.path == "/" ? "/v1/embeddings" : url.path;
        url.path.clear();
        url_ = url;
    }

    EmbeddingVector embed(const std::string& text) const override {
        nlohmann::json body = {{"model", config_.model_name},
                               {"input", nlohmann::json::array({text})}};
        HttpOptions opts;
        opts.timeout_seconds = config_.timeout_seconds;
        opts.retries = config_.retries;
        opts.backoff_initial_ms = config_.backoff_initial_ms;
        opts.retry_on_429 = false; // every 4xx is a configuration problem here
        opts.bearer_token = read_api_key(config_.api_key_env);

        HttpResult result = post_json_with_retries(url_, path_, body, opts);
        std::vector<double> raw = parse_embedding_response(result.body);

        EmbeddingVector vec;
        vec.provider_tag = tag();
        if (raw.size() != kEmbeddingDim) {
            record_warning("embedding endpoint returned " + std::to_string(raw.size()) +
                           " dims; adapted to " + std::to_string(kEmbeddingDim) +
                           " by truncation/zero-padding");
            raw.resize(kEmbeddingDim, 0.0);
        }
        vec.values = std::move(raw);
        l2_normalize(vec.values);
        return vec;
    }

    std::string tag() const override { return "remote-" + config_.model_name; }

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    static std::vector<double> parse_embedding_response(const std::string& body) {
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(std::string("embedding response is not valid JSON: ") + ex.what());
        }
        if (!parsed.contains("data") || !parsed["data"].is_array() || parsed["data"].empty() ||
            !parsed["data"][0].contains("embedding") ||
            !parsed["data"][0]["embedding"].is_array()) {
            throw ConfigError("embedding response missing data[0].embedding");
        }
        std::vector<double> values;
        for (const auto& v : parsed["data"][0]["embedding"]) {
            if (!v.is_number()) throw ConfigError("embedding contains a non-numeric component");
            values.push_back(v.get<double>());
        }
        return values;
    }

    void record_warning(const std::string& message) const { warnings_.push_back(message); }

    EmbeddingEndpointConfig config_;
    ParsedUrl url_;
    std::string path_;
    mutable std::vector<std::string> warnings_;
};

/// id -> vector map persisted next to the inverted index. All vectors share
/// one provider tag; iteration order is the corpus order so rebuilds are
/// byte-identical.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::string provider_tag) : provider_tag_(std::move(provider_tag)) {}

    void add(const std::string& id, EmbeddingVector vec) {
        if (index_.count(id)) throw Error("duplicate id \"" + id + "\" in embedding store");
        index_.emplace(id, order_.size());
        order_.emplace_back(id, std::move(vec));
    }

    const EmbeddingVector* find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return nullptr;
        return &order_[it->second].second;
    }

    std::size_t size() const { return order_.size(); }
    const std::string& provider_tag() const { return provider_tag_; }
    const std::vector<std::pair<std::string, EmbeddingVector>>& entries() const { return order_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open embedding store for writing: " + path);
        nlohmann::json header = {{"format", "react-cmg-emb"},
                                 {"version", 1},
                                 {"provider", provider_tag_},
                                 {"dim", kEmbeddingDim},
                                 {"count", order_.size()}};
        out << header.dump() << '\n';
        for (const auto& [id, vec] : order_) {
            nlohmann::json line = {{"id", id}, {"v", vec.values}};
            out << line.dump() << '\n';
        }
        out.flush();
        if (!out) throw Error("write failed: " + path);
    }

    static EmbeddingStore load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open embedding store: " + path);
        std::string line;
        if (!std::getline(in, line)) throw Error("embedding store is empty: " + path);
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw Error(path + ": bad store header: " + ex.what());
        }
        if (header.value("format", "") != "react-cmg-emb") {
            throw Error(path + ": not an embedding store (missing magic)");
        }
        if (header.value("version", 0) != 1) {
            throw Error(path + ": unsupported store version");
        }
        EmbeddingStore store(header.value("provider", ""));
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
            EmbeddingVector vec;
            vec.provider_tag = store.provider_tag_;
            vec.values = obj.at("v").get<std::vector<double>>();
            if (vec.values.size() != kEmbeddingDim) {
                throw Error(path + ": line " + std::to_string(line_number) +
                            ": vector has wrong dimension");
            }
            store.add(obj.at("id").get<std::string>(), std::move(vec));
        }
        return store;
    }

private:
    std::string provider_tag_;
    std::vector<std::pair<std::string, EmbeddingVector>> order_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Embed every corpus entry in corpus order. A provider failure aborts the
/// build and names the entry that failed.
inline EmbeddingStore build_store(const Corpus& corpus, const EmbeddingProvider& provider,
                                  const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    EmbeddingStore store(provider.tag());
    std::size_t done = 0;
    for (const auto& pair : corpus.entries()) {
        try {
            store.add(pair.id, provider.embed(pair.diff_text));
        } catch (const Error& ex) {
            throw Error("embedding failed for entry \"" + pair.id + "\": " + ex.what());
        }
        ++done;
        if (progress) progress(done, corpus.size());
    }
    return store;
}

} // namespace reactcmg
