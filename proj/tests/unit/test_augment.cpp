#include <catch2/catch_amalgamated.hpp>

#include <reactcmg/augment.hpp>

#include "support/tmp.hpp"

#include <random>

using namespace reactcmg;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

DiffMessagePair exemplar(const std::string& diff, const std::string& msg,
                         const std::string& id = "ex") {
    DiffMessagePair pair;
    pair.id = id;
    pair.diff_text = diff;
    pair.message_text = msg;
    return pair;
}

std::string user_content(const AugmentedInput& input) {
    REQUIRE(input.kind == AugmentedInput::Kind::LlmPrompt);
    REQUIRE(input.messages.size() == 2);
    CHECK(input.messages[0].role == "system");
    CHECK(input.messages[1].role == "user");
    return input.messages[1].content;
}

std::size_t prompt_tokens(const AugmentedInput& input) {
    return count_tokens(input.messages[0].content) + count_tokens(input.messages[1].content);
}

std::size_t substr_count(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

} // namespace

TEST_CASE("concat_plm produces the exact marker format", "[augment]") {
    auto input = concat_plm("q", exemplar("d", "m"), "query-1");
    CHECK(input.kind == AugmentedInput::Kind::PlmConcat);
    CHECK(input.plm_text == "[QUERY]q[DIFF]d[MSG]m");
    CHECK(input.query_id == "query-1");
    CHECK(input.exemplar_id == "ex");

    CHECK(concat_plm("", exemplar("d", "m")).plm_text == "[QUERY][DIFF]d[MSG]m");

    auto longer = concat_plm("+int x = 1;\n", exemplar("+int y = 2;\n", "add y"));
    CHECK(substr_count(longer.plm_text, "[QUERY]") == 1);
    CHECK(substr_count(longer.plm_text, "[DIFF]") == 1);
    CHECK(substr_count(longer.plm_text, "[MSG]") == 1);
    CHECK(longer.plm_text.find("[QUERY]") < longer.plm_text.find("[DIFF]"));
    CHECK(longer.plm_text.find("[DIFF]") < longer.plm_text.find("[MSG]"));
}

TEST_CASE("concat_plm rejects marker collisions", "[augment]") {
    CHECK_THROWS_AS(concat_plm("evil [QUERY] inside", exemplar("d", "m")), MarkerCollisionError);
    CHECK_THROWS_AS(concat_plm("q", exemplar("has [MSG] marker", "m")), MarkerCollisionError);
    CHECK_THROWS_AS(concat_plm("q", exemplar("d", "[DIFF]")), MarkerCollisionError);
}

TEST_CASE("react prompt substitutes each placeholder exactly once", "[augment]") {
    auto ex = exemplar("EXEMPLAR_DIFF_BODY", "EXEMPLAR_MSG_BODY");
    auto input = render_llm_prompt("QUERY_DIFF_BODY", &ex, default_react_template(), TokenBudget{});
    std::string user = user_content(input);
    CHECK(substr_count(user, "QUERY_DIFF_BODY") == 1);
    CHECK(substr_count(user, "EXEMPLAR_DIFF_BODY") == 1);
    CHECK(substr_count(user, "EXEMPLAR_MSG_BODY") == 1);
    CHECK(user.find("{query_diff}") == std::string::npos);
    CHECK(input.exemplar_id == "ex");
}

TEST_CASE("direct prompt carries no exemplar text", "[augment]") {
    auto input = render_llm_prompt("QUERY_DIFF_BODY", nullptr, default_direct_template(),
                                   TokenBudget{}, "q1");
    std::string user = user_content(input);
    CHECK(substr_count(user, "QUERY_DIFF_BODY") == 1);
    CHECK(user.find("Example") == std::string::npos);
    CHECK(input.exemplar_id.empty());

    auto ex = exemplar("d", "m");
    CHECK_THROWS_AS(render_llm_prompt("q", &ex, default_direct_template(), TokenBudget{}), Error);
    CHECK_THROWS_AS(render_llm_prompt("q", nullptr, default_react_template(), TokenBudget{}),
                    Error);
}

TEST_CASE("inserted values are not re-scanned for placeholders", "[augment]") {
    auto ex = exemplar("diff with {retrieved_msg} literal", "msg body");
    auto input = render_llm_prompt("query {query_diff} literal", &ex, default_react_template(),
                                   TokenBudget{});
    std::string user = user_content(input);
    CHECK(substr_count(user, "query {query_diff} literal") == 1);
    CHECK(substr_count(user, "diff with {retrieved_msg} literal") == 1);
}

TEST_CASE("budget truncates the exemplar diff first", "[augment]") {
    std::string huge;
    for (int i = 0; i < 10000; ++i) huge += "tok" + std::to_string(i) + " ";
    auto ex = exemplar(huge, "short exemplar message");
    TokenBudget budget; // default 3500
    auto input = render_llm_prompt("short query diff", &ex, default_react_template(), budget);
    std::string user = user_content(input);
    CHECK(prompt_tokens(input) <= budget.max_total);
    CHECK(user.find(kTruncationMarker) != std::string::npos);
    CHECK(substr_count(user, "short query diff") == 1);            // query intact
    CHECK(substr_count(user, "short exemplar message") == 1);      // message intact
}

TEST_CASE("budget falls through the truncation order", "[augment]") {
    std::string big_a, big_b;
    for (int i = 0; i < 400; ++i) big_a += "aa" + std::to_string(i) + " ";
    for (int i = 0; i < 400; ++i) big_b += "bb" + std::to_string(i) + " ";
    auto ex = exemplar(big_a, "tiny msg");
    TokenBudget budget;
    budget.max_total = 120;
    auto input = render_llm_prompt(big_b, &ex, default_react_template(), budget);
    CHECK(prompt_tokens(input) <= budget.max_total);
    std::string user = user_content(input);
    CHECK(substr_count(user, kTruncationMarker) == 2); // both diffs truncated
    CHECK(substr_count(user, "tiny msg") == 1);
}

TEST_CASE("impossible budgets raise BudgetError", "[augment]") {
    auto ex = exemplar("some diff body", "some message");
    TokenBudget budget;
    budget.max_total = 5; // template scaffold alone exceeds this
    CHECK_THROWS_AS(render_llm_prompt("query", &ex, default_react_template(), budget),
                    BudgetError);
}

TEST_CASE("prompt rendering is deterministic and never over budget", "[augment]") {
    std::mt19937_64 rng(67);
    for (int iter = 0; iter < 60; ++iter) {
        std::string q, d, m;
        auto fill = [&rng](std::string& out, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) out += "t" + std::to_string(rng() % 50) + " ";
        };
        fill(q, rng() % 300);
        fill(d, rng() % 300);
        fill(m, rng() % 40);
        TokenBudget budget;
        budget.max_total = 60 + rng() % 400;
        auto ex = exemplar(d, m);
        AugmentedInput a;
        try {
            a = render_llm_prompt(q, &ex, default_react_template(), budget);
        } catch (const BudgetError&) {
            continue; // legal outcome for tiny budgets
        }
        CHECK(prompt_tokens(a) <= budget.max_total);
        auto b = render_llm_prompt(q, &ex, default_react_template(), budget);
        CHECK(a.messages[0].content == b.messages[0].content);
        CHECK(a.messages[1].content == b.messages[1].content);
    }
}

TEST_CASE("template files load with the separator convention", "[augment]") {
    TempDir tmp;
    auto path = tmp.file("react.tmpl");
    write_file(path,
               "System line here.\n"
               "---\n"
               "Example diff:\n{retrieved_diff}\nExample message:\n{retrieved_msg}\n"
               "Query:\n{query_diff}\n");
    PromptTemplate tmpl = load_template_file(path, PromptTemplate::Name::React);
    CHECK(tmpl.system_text == "System line here.");
    CHECK(tmpl.user_text.find("{query_diff}") != std::string::npos);

    auto bad = tmp.file("bad.tmpl");
    write_file(bad, "no separator at all\n");
    CHECK_THROWS_AS(load_template_file(bad, PromptTemplate::Name::Direct), ConfigError);

    auto wrong = tmp.file("wrong.tmpl");
    write_file(wrong, "sys\n---\nuser text without placeholders\n");
    CHECK_THROWS_AS(load_template_file(wrong, PromptTemplate::Name::Direct), ConfigError);
}

TEST_CASE("template invariants are validated", "[augment]") {
    PromptTemplate twice = default_react_template();
    twice.user_text += "\n{query_diff}";
    CHECK_THROWS_AS(validate_template(twice), ConfigError);

    PromptTemplate direct_with_exemplar = default_direct_template();
    direct_with_exemplar.user_text += "\n{retrieved_msg}";
    CHECK_THROWS_AS(validate_template(direct_with_exemplar), ConfigError);

    CHECK_NOTHROW(validate_template(default_direct_template()));
    CHECK_NOTHROW(validate_template(default_react_template()));
}

TEST_CASE("export_finetune_dataset writes input/target lines", "[augment]") {
    TempDir tmp;
    auto out = tmp.file("finetune.jsonl");
    std::vector<std::pair<DiffMessagePair, DiffMessagePair>> pairs;
    for (int i = 0; i < 3; ++i) {
        DiffMessagePair query;
        query.id = "q" + std::to_string(i);
        query.diff_text = "+query diff " + std::to_string(i);
        query.message_text = "query message " + std::to_string(i);
        pairs.emplace_back(query, exemplar("+exemplar diff body", "exemplar message text",
                                           "s" + std::to_string(i)));
    }
    CHECK(export_finetune_dataset(pairs, out) == 3);

    std::ifstream in(out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        auto obj = nlohmann::json::parse(line);
        std::string input = obj.at("input").get<std::string>();
        CHECK(input.rfind("[QUERY]", 0) == 0);
        // The target is the query's own message, never the exemplar's.
        CHECK(obj.at("target").get<std::string>() == pairs[n].first.message_text);
        // Token accounting: the three bracketed markers tokenize to one token
        // each, so the input counts the three fields plus exactly 3.
        std::size_t expected = count_tokens(pairs[n].first.diff_text) +
                               count_tokens(pairs[n].second.diff_text) +
                               count_tokens(pairs[n].second.message_text) + 3;
        CHECK(count_tokens(input) == expected);
        ++n;
    }
    CHECK(n == 3);
}
