#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gosu/errors.hpp"
#include "gosu/provider.hpp"
#include "gosu/util.hpp"
#include "testutil.hpp"

using namespace gosu;

namespace {

CompletionRequest sample_request() {
    CompletionRequest req;
    req.task = TaskTag::su_extract;
    req.sections = {{"chunk", "Ramipril lowers blood pressure."}};
    req.max_output_tokens = 512;
    return req;
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
    return s;
}

}  // namespace

// ============================================================================
// Fingerprints
// ============================================================================

TEST_CASE("fingerprint covers task and sections but not the output ceiling") {
    const CompletionRequest base = sample_request();
    const std::string fp = request_fingerprint(base);
    CHECK(fp.size() == 64);  // sha-256 hex

    CompletionRequest ceiling = base;
    ceiling.max_output_tokens = 8;
    CHECK(request_fingerprint(ceiling) == fp);

    CompletionRequest other_task = base;
    other_task.task = TaskTag::pre_kg_extract;
    CHECK(request_fingerprint(other_task) != fp);

    CompletionRequest other_text = base;
    other_text.sections[0].text += "!";
    CHECK(request_fingerprint(other_text) != fp);

    CompletionRequest other_name = base;
    other_name.sections[0].name = "chunk2";
    CHECK(request_fingerprint(other_name) != fp);
}

TEST_CASE("fingerprint is sensitive to section order") {
    CompletionRequest ab = sample_request();
    ab.sections = {{"a", "1"}, {"b", "2"}};
    CompletionRequest ba = sample_request();
    ba.sections = {{"b", "2"}, {"a", "1"}};
    CHECK(request_fingerprint(ab) != request_fingerprint(ba));
}

TEST_CASE("fingerprint cannot be spoofed by delimiter injection") {
    CompletionRequest one = sample_request();
    one.sections = {{"a", "x\"y"}, {"b", "z"}};
    CompletionRequest two = sample_request();
    two.sections = {{"a", "x"}, {"yb", "z"}};
    CHECK(request_fingerprint(one) != request_fingerprint(two));
}

TEST_CASE("task tag names round-trip") {
    for (TaskTag tag : {TaskTag::su_extract, TaskTag::su_judge, TaskTag::su_refine,
                        TaskTag::pre_kg_extract, TaskTag::su_entrel_extract,
                        TaskTag::keyword_extract, TaskTag::answer_gen, TaskTag::judge_pair}) {
        const auto parsed = task_tag_from_string(to_string(tag));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == tag);
    }
    CHECK(!task_tag_from_string("not_a_task").has_value());
}

// ============================================================================
// Record protocol
// ============================================================================

namespace {

RecordSchema entity_relation_schema() {
    RecordSchema schema;
    schema.arity_by_kind = {{"entity", 4}, {"relation", 5}};
    return schema;
}

}  // namespace

TEST_CASE("render and parse are inverse on well-formed tuples") {
    const std::vector<std::vector<std::string>> tuples = {
        {"entity", "RAMIPRIL", "drug", "An ACE inhibitor."},
        {"relation", "RAMIPRIL", "BLOOD PRESSURE", "Lowers it.", "mechanism"},
    };
    const std::string raw = render_records(tuples);
    CHECK(raw.find("<|COMPLETE|>") != std::string::npos);

    const ParsedRecords parsed = parse_records(raw, entity_relation_schema());
    CHECK(parsed.dropped == 0);
    CHECK(parsed.tuples == tuples);
}

TEST_CASE("parse drops wrong-arity and unknown-kind records, counting them") {
    const std::string raw =
        "(\"entity\"<|>\"A\"<|>\"t\"<|>\"d\")##"
        "(\"entity\"<|>\"missing fields\")##"
        "(\"mystery\"<|>\"B\"<|>\"t\"<|>\"d\")##"
        "(\"relation\"<|>\"A\"<|>\"B\"<|>\"d\"<|>\"k\")<|COMPLETE|>";
    const ParsedRecords parsed = parse_records(raw, entity_relation_schema());
    REQUIRE(parsed.tuples.size() == 2);
    CHECK(parsed.dropped == 2);
    CHECK(parsed.tuples[0][1] == "A");
    CHECK(parsed.tuples[1][0] == "relation");
}

TEST_CASE("a missing terminator is truncation, not an empty result") {
    CHECK_THROWS_AS(parse_records("(\"entity\"<|>\"A\"<|>\"t\"<|>\"d\")", entity_relation_schema()),
                    NoTerminatorError);
    // Terminator alone is a valid empty completion.
    const ParsedRecords parsed = parse_records("<|COMPLETE|>", entity_relation_schema());
    CHECK(parsed.tuples.empty());
    CHECK(parsed.dropped == 0);
}

TEST_CASE("interior quotes and newlines survive a round-trip") {
    const std::vector<std::vector<std::string>> tuples = {
        {"entity", "A \"quoted\" name", "type", "line one\nline two"},
    };
    const ParsedRecords parsed = parse_records(render_records(tuples), entity_relation_schema());
    REQUIRE(parsed.tuples.size() == 1);
    CHECK(parsed.tuples[0][1] == "A \"quoted\" name");
    CHECK(parsed.tuples[0][3] == "line one\nline two");
}

TEST_CASE("parse is charitable about wrapping whitespace and parentheses") {
    const std::string raw =
        "  (\"entity\"<|> \"A\" <|>\"t\"<|>\"d\")  ##\n"
        "\"entity\"<|>\"B\"<|>\"t\"<|>\"d\"##<|COMPLETE|> trailing noise";
    const ParsedRecords parsed = parse_records(raw, entity_relation_schema());
    REQUIRE(parsed.tuples.size() == 2);
    CHECK(parsed.tuples[0][1] == "A");
    CHECK(parsed.tuples[1][1] == "B");
    CHECK(parsed.dropped == 0);
}

// ============================================================================
// Scripted embeddings
// ============================================================================

TEST_CASE("scripted embeddings are unit-norm and deterministic") {
    const auto v1 = scripted_embedding("ACE inhibitors lower blood pressure", 17, 64);
    const auto v2 = scripted_embedding("ACE inhibitors lower blood pressure", 17, 64);
    REQUIRE(v1.size() == 64);
    CHECK(v1 == v2);
    CHECK(std::abs(dot(v1, v1) - 1.0) < 1e-5);
}

TEST_CASE("scripted embeddings are a token bag: order-insensitive, case-insensitive") {
    const auto ab = scripted_embedding("alpha beta", 17, 64);
    const auto ba = scripted_embedding("beta  ALPHA", 17, 64);
    CHECK(std::abs(dot(ab, ba) - 1.0) < 1e-5);

    const auto other = scripted_embedding("alpha gamma", 17, 64);
    CHECK(dot(ab, other) < 0.999);
}

TEST_CASE("seed and dimension change the embedding space") {
    const auto a = scripted_embedding("alpha beta", 17, 64);
    const auto b = scripted_embedding("alpha beta", 18, 64);
    CHECK(std::abs(dot(a, b)) < 0.999);
    CHECK(scripted_embedding("alpha", 17, 32).size() == 32);
}

// ============================================================================
// Fixture store
// ============================================================================

TEST_CASE("fixture write then replay returns the exact completion") {
    testutil::TempDir tmp("fixtures");
    const CompletionRequest req = sample_request();
    ScriptedBackend::write_fixture(tmp.path(), req, "canned completion", 100, 20);

    ScriptedBackend backend(tmp.path(), 17, 64);
    const CompletionResult got = backend.complete(req);
    CHECK(got.text == "canned completion");
    CHECK(got.prompt_tokens == 100);
    CHECK(got.completion_tokens == 20);
}

TEST_CASE("missing fixture raises an error naming task and fingerprint") {
    testutil::TempDir tmp("nofixtures");
    ScriptedBackend backend(tmp.path(), 17, 64);
    const CompletionRequest req = sample_request();
    try {
        backend.complete(req);
        FAIL("expected FixtureMissingError");
    } catch (const FixtureMissingError& e) {
        CHECK(e.task() == "su_extract");
        CHECK(e.fingerprint() == request_fingerprint(req));
        CHECK(std::string(e.what()).find(request_fingerprint(req)) != std::string::npos);
    }
}

TEST_CASE("default fixture token counts come from the tokenizer") {
    testutil::TempDir tmp("fixtokens");
    const CompletionRequest req = sample_request();
    ScriptedBackend::write_fixture(tmp.path(), req, "two words");
    ScriptedBackend backend(tmp.path(), 17, 64);
    const CompletionResult got = backend.complete(req);
    CHECK(got.completion_tokens == 2);
    CHECK(got.prompt_tokens > 0);
}

// ============================================================================
// Provider metering
// ============================================================================

TEST_CASE("embedding usage counts tokenizer tokens across the batch") {
    auto backend = std::make_unique<CallbackBackend>(
        [](const CompletionRequest&) -> CompletionResult { return {"", 0, 0}; }, 17, 8);
    Provider provider(std::move(backend), PriceTable{}, 1);

    // 7 tokens + 9 tokens = 16 embedding tokens.
    const std::vector<std::string> texts = {
        "one two three four five six seven",
        "a b c d e f g h i",
    };
    const auto vecs = provider.embed(texts, Phase::build);
    REQUIRE(vecs.size() == 2);
    CHECK(provider.usage_snapshot(Phase::build).embedding_tokens == 16);
    CHECK(provider.usage_snapshot(Phase::query).embedding_tokens == 0);
}

TEST_CASE("usd is derived from token counts and the price table") {
    auto backend = std::make_unique<CallbackBackend>(
        [](const CompletionRequest&) -> CompletionResult { return {"ok", 120, 80}; }, 17, 8);
    PriceTable prices;
    prices.prompt = 1e-7;
    prices.completion = 4e-7;
    Provider provider(std::move(backend), prices, 1);

    provider.complete(sample_request(), Phase::query);
    const ProviderUsage usage = provider.usage_snapshot(Phase::query);
    CHECK(usage.prompt_tokens == 120);
    CHECK(usage.completion_tokens == 80);
    // 120 * 1e-7 + 80 * 4e-7 = 0.000044
    CHECK(usage.usd_cost == doctest::Approx(0.000044).epsilon(1e-12));
}

TEST_CASE("per-phase counters are exact integer sums over the log") {
    auto backend = std::make_unique<CallbackBackend>(
        [](const CompletionRequest&) -> CompletionResult { return {"ok", 10, 5}; }, 17, 8);
    Provider provider(std::move(backend), PriceTable{}, 1);

    provider.complete(sample_request(), Phase::build);
    provider.complete(sample_request(), Phase::build);
    provider.complete(sample_request(), Phase::query);
    provider.embed({"x y z"}, Phase::query);

    const auto log = provider.usage_log();
    REQUIRE(log.size() == 4);
    const ProviderUsage build = fold_usage(log, Phase::build, provider.prices());
    const ProviderUsage query = fold_usage(log, Phase::query, provider.prices());
    CHECK(build.prompt_tokens == provider.usage_snapshot(Phase::build).prompt_tokens);
    CHECK(build.completion_tokens == 10);
    CHECK(query.prompt_tokens == 10);
    CHECK(query.embedding_tokens == 3);
}

TEST_CASE("usage jsonl save, append, and load round-trip") {
    testutil::TempDir tmp("usagelog");
    const auto file = tmp / "usage.jsonl";
    std::vector<UsageRecord> first = {
        {"build", "su_extract", 100, 40, 0},
        {"build", "embed", 0, 0, 500},
    };
    save_usage_jsonl(file, first);
    std::vector<UsageRecord> more = {{"query", "answer_gen", 30, 12, 0}};
    append_usage_jsonl(file, more);

    const auto loaded = load_usage_jsonl(file);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].task == "su_extract");
    CHECK(loaded[1].embedding_tokens == 500);
    CHECK(loaded[2].phase == "query");
    CHECK(loaded[2].completion_tokens == 12);
}
