#include <catch2/catch_amalgamated.hpp>

#include <reactcmg/embed.hpp>

#include "support/stub_server.hpp"
#include "support/tmp.hpp"

#include <atomic>
#include <cmath>
#include <random>

using namespace reactcmg;
using testsupport::StubServer;
using testsupport::TempDir;

namespace {

class FailingProvider : public EmbeddingProvider {
public:
    explicit FailingProvider(std::string fail_on) : fail_on_(std::move(fail_on)) {}

    EmbeddingVector embed(const std::string& text) const override {
        if (text == fail_on_) throw Error("simulated provider failure");
        return LocalHashEmbedder{}.embed(text);
    }

    std::string tag() const override { return "failing"; }

private:
    std::string fail_on_;
};

Corpus small_corpus() {
    Corpus corpus;
    corpus.add({"a", "", 0, "fix null pointer", "msg a", "", {}});
    corpus.add({"b", "", 0, "add unit tests", "msg b", "", {}});
    corpus.add({"c", "", 0, "update readme docs", "msg c", "", {}});
    return corpus;
}

} // namespace

TEST_CASE("local embedder is deterministic and unit-norm", "[embed]") {
    LocalHashEmbedder embedder;
    auto v1 = embedder.embed("fix null pointer dereference in parser");
    auto v2 = embedder.embed("fix null pointer dereference in parser");
    CHECK(v1.values == v2.values); // bitwise identical
    CHECK(v1.provider_tag == "local-hash-v1");
    CHECK(std::abs(v1.norm() - 1.0) < 1e-6);

    auto empty = embedder.embed("");
    CHECK(empty.norm() == 0.0);
}

TEST_CASE("local embedder is a bag of words", "[embed]") {
    LocalHashEmbedder embedder;
    auto v1 = embedder.embed("alpha beta gamma alpha");
    auto v2 = embedder.embed("alpha alpha gamma beta");
    CHECK(v1.values == v2.values);
}

TEST_CASE("scaling before normalization changes nothing", "[embed]") {
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<double> raw(kEmbeddingDim, 0.0);
        for (auto& v : raw) v = static_cast<double>(rng() % 100) - 50.0;
        std::vector<double> scaled = raw;
        for (auto& v : scaled) v *= 7.5;
        l2_normalize(raw);
        l2_normalize(scaled);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            CHECK(raw[i] == Catch::Approx(scaled[i]).margin(1e-12));
        }
    }
}

TEST_CASE("cosine basics", "[embed]") {
    std::vector<double> e1(kEmbeddingDim, 0.0);
    std::vector<double> e2(kEmbeddingDim, 0.0);
    e1[0] = 1.0;
    e2[1] = 1.0;
    CHECK(cosine(e1, e1) == Catch::Approx(1.0).margin(1e-9));
    CHECK(cosine(e1, e2) == 0.0);

    std::vector<double> zero(kEmbeddingDim, 0.0);
    CHECK(cosine(zero, e1) == 0.0);

    std::vector<double> shorter(8, 1.0);
    CHECK_THROWS_AS(cosine(shorter, e1), Error);

    LocalHashEmbedder embedder;
    auto a = embedder.embed("fix the parser bug");
    auto b = embedder.embed("unrelated words entirely different");
    CHECK(cosine(a, b) == Catch::Approx(cosine(b, a)).margin(1e-12));
    CHECK(cosine(a, a) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("build_store covers the corpus and is reproducible", "[embed]") {
    TempDir tmp;
    Corpus corpus = small_corpus();
    LocalHashEmbedder embedder;
    EmbeddingStore store = build_store(corpus, embedder);
    CHECK(store.size() == 3);
    CHECK(store.provider_tag() == "local-hash-v1");
    CHECK(store.find("b") != nullptr);
    CHECK(store.find("nope") == nullptr);

    auto p1 = tmp.file("one.emb");
    auto p2 = tmp.file("two.emb");
    store.save(p1);
    build_store(corpus, embedder).save(p2);
    CHECK(testsupport::read_file(p1) == testsupport::read_file(p2));
    CHECK_FALSE(testsupport::read_file(p1).empty());

    EmbeddingStore loaded = EmbeddingStore::load(p1);
    CHECK(loaded.size() == 3);
    CHECK(loaded.provider_tag() == "local-hash-v1");
    REQUIRE(loaded.find("a") != nullptr);
    CHECK(loaded.find("a")->values == store.find("a")->values);
}

TEST_CASE("build_store failure names the entry", "[embed]") {
    Corpus corpus = small_corpus();
    FailingProvider provider("add unit tests");
    CHECK_THROWS_WITH(build_store(corpus, provider),
                      Catch::Matchers::ContainsSubstring("\"b\""));
}

TEST_CASE("remote embedder passes a 256-dim vector through", "[embed][net]") {
    StubServer stub;
    stub.post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body["input"].is_array());
        std::vector<double> values(kEmbeddingDim, 0.0);
        values[3] = 2.0; // not normalized; the client must normalize
        nlohmann::json out = {{"data", {{{"embedding", values}}}}};
        res.set_content(out.dump(), "application/json");
    });
    stub.start();

    EmbeddingEndpointConfig config;
    config.endpoint_url = stub.url();
    RemoteEmbedder embedder(config);
    auto vec = embedder.embed("some diff");
    CHECK(vec.values[3] == Catch::Approx(1.0).margin(1e-9));
    CHECK(std::abs(vec.norm() - 1.0) < 1e-6);
    CHECK(embedder.warnings().empty());
}

TEST_CASE("remote embedder adapts wrong dimensions and records a warning", "[embed][net]") {
    StubServer stub;
    stub.post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
        std::vector<double> values(512, 0.0);
        values[0] = 1.0;
        values[400] = 9.0; // beyond dim 256, must be dropped
        nlohmann::json out = {{"data", {{{"embedding", values}}}}};
        res.set_content(out.dump(), "application/json");
    });
    stub.start();

    EmbeddingEndpointConfig config;
    config.endpoint_url = stub.url();
    RemoteEmbedder embedder(config);
    auto vec = embedder.embed("some diff");
    CHECK(vec.values.size() == kEmbeddingDim);
    CHECK(vec.values[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(embedder.warnings().size() == 1);
    CHECK(embedder.warnings()[0].find("512") != std::string::npos);
}

TEST_CASE("remote embedder retries transient failures then gives up", "[embed][net]") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.post("/v1/embeddings", [&hits](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    stub.start();

    EmbeddingEndpointConfig config;
    config.endpoint_url = stub.url();
    config.retries = 2;
    config.backoff_initial_ms = 1;
    RemoteEmbedder embedder(config);
    CHECK_THROWS_AS(embedder.embed("x"), RetryableError);
    CHECK(hits == 3); // retries + 1 attempts in total
}

TEST_CASE("remote embedder treats 4xx as a configuration error", "[embed][net]") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.post("/v1/embeddings", [&hits](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
        res.set_content("{\"error\": \"bad key\"}", "application/json");
    });
    stub.start();

    EmbeddingEndpointConfig config;
    config.endpoint_url = stub.url();
    config.backoff_initial_ms = 1;
    RemoteEmbedder embedder(config);
    CHECK_THROWS_WITH(embedder.embed("x"), Catch::Matchers::ContainsSubstring("bad key"));
    CHECK(hits == 1); // no retry on 4xx
}

TEST_CASE("remote embedder sends the bearer token when the env var is set", "[embed][net]") {
    StubServer stub;
    std::string seen_auth;
    stub.post("/v1/embeddings", [&seen_auth](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        std::vector<double> values(kEmbeddingDim, 0.0);
        values[0] = 1.0;
        nlohmann::json out = {{"data", {{{"embedding", values}}}}};
        res.set_content(out.dump(), "application/json");
    });
    stub.start();

    ::setenv("REACT_CMG_TEST_KEY", "sk-test-123", 1);
    EmbeddingEndpointConfig config;
    config.endpoint_url = stub.url();
    config.api_key_env = "REACT_CMG_TEST_KEY";
    RemoteEmbedder embedder(config);
    embedder.embed("x");
    CHECK(seen_auth == "Bearer sk-test-123");
    ::unsetenv("REACT_CMG_TEST_KEY");
}
