#include <doctest.h>

#include <memory>
#include <string>
#include <vector>

#include "gosu/corpus.hpp"
#include "gosu/errors.hpp"
#include "gosu/generation.hpp"
#include "gosu/graph.hpp"
#include "gosu/provider.hpp"
#include "gosu/retrieval.hpp"
#include "gosu/tokenizer.hpp"

using namespace gosu;

namespace {

// A compact world with one of everything renderable.
struct RenderWorld {
    KnowledgeGraph graph;
    CorpusStore corpus;
    FusionInputs fusion;

    RenderWorld() {
        EntityNode a;
        a.entity_key = "RAMIPRIL";
        a.display_name = "ramipril";
        a.entity_type = "drug";
        a.descriptions = {"An ACE inhibitor.", "Titrated upward."};
        a.source_chunk_ids = {"c1", "c2"};
        graph.entities["RAMIPRIL"] = a;

        EntityNode b;
        b.entity_key = "BLOOD PRESSURE";
        b.display_name = "blood pressure";
        b.entity_type = "measurement";
        b.descriptions = {"What falls."};
        b.source_chunk_ids = {"c2"};
        graph.entities["BLOOD PRESSURE"] = b;

        RelationEdge r;
        r.src = "BLOOD PRESSURE";
        r.dst = "RAMIPRIL";
        r.descriptions = {"Ramipril lowers blood pressure."};
        r.keywords = {"mechanism", "antihypertensive"};
        r.provenance = {{"c2", ""}, {"c1", "su_x"}};
        r.weight = 2;
        graph.relations[{r.src, r.dst}] = r;

        SUNode n;
        n.su_id = "su_x";
        n.name = "Pressure lowering";
        n.description = "Ramipril lowers blood pressure\nover weeks.";
        n.chunk_ids = {"c1"};
        n.member_entity_keys = {"RAMIPRIL"};
        graph.su_nodes["su_x"] = n;

        Chunk c1;
        c1.chunk_id = "c1";
        c1.doc_id = "d";
        c1.text = "Chunk one text.";
        corpus.add(c1);
        Chunk c2;
        c2.chunk_id = "c2";
        c2.doc_id = "d";
        c2.text = "Chunk two text.";
        corpus.add(c2);

        fusion.sus = {"su_x"};
        GraphRow rel_row;
        rel_row.is_relation = true;
        rel_row.key = relation_key("BLOOD PRESSURE", "RAMIPRIL");
        rel_row.src = "BLOOD PRESSURE";
        rel_row.dst = "RAMIPRIL";
        GraphRow ent_row;
        ent_row.key = "RAMIPRIL";
        GraphRow ent_row2;
        ent_row2.key = "BLOOD PRESSURE";
        fusion.graph_rows = {rel_row, ent_row, ent_row2};
        fusion.chunks = {"c1", "c2"};
    }
};

}  // namespace

// ============================================================================
// Rendering
// ============================================================================

TEST_CASE("the rendered context matches the golden layout exactly") {
    RenderWorld world;
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, 100000);
    const std::string expected =
        "[semantic_units]\n"
        "su_id\tname\tdescription\tchunks\n"
        "su_x\tPressure lowering\tRamipril lowers blood pressure over weeks.\tc1\n"
        "\n"
        "[relations]\n"
        "src\tdst\tdescription\tkeywords\tweight\tchunks\n"
        "BLOOD PRESSURE\tRAMIPRIL\tRamipril lowers blood pressure.\tmechanism;antihypertensive\t2\tc1;c2\n"
        "\n"
        "[entities]\n"
        "key\ttype\tdescription\tchunks\n"
        "RAMIPRIL\tdrug\tAn ACE inhibitor. | Titrated upward.\tc1;c2\n"
        "BLOOD PRESSURE\tmeasurement\tWhat falls.\tc2\n"
        "\n"
        "[chunks]\n"
        "chunk_id\ttext\n"
        "c1\tChunk one text.\n"
        "c2\tChunk two text.\n";
    CHECK(doc.render() == expected);
}

TEST_CASE("empty sections vanish from the render") {
    RenderWorld world;
    world.fusion.sus.clear();
    world.fusion.chunks.clear();
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, 100000);
    const std::string rendered = doc.render();
    CHECK(rendered.find("[semantic_units]") == std::string::npos);
    CHECK(rendered.find("[chunks]") == std::string::npos);
    CHECK(rendered.find("[relations]") != std::string::npos);
    CHECK(rendered.find("[entities]") != std::string::npos);
}

TEST_CASE("unknown ids are skipped, not rendered or fatal") {
    RenderWorld world;
    world.fusion.sus.push_back("su_ghost");
    world.fusion.chunks.push_back("c_ghost");
    GraphRow ghost;
    ghost.key = "GHOST ENTITY";
    world.fusion.graph_rows.push_back(ghost);
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, 100000);
    CHECK(doc.render().find("ghost") == std::string::npos);
    CHECK(doc.render().find("GHOST") == std::string::npos);
}

TEST_CASE("stats report per-section rows and total tokens") {
    RenderWorld world;
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, 100000);
    const auto stats = doc.stats();
    CHECK(stats.at("semantic_units_rows") == 1);
    CHECK(stats.at("relations_rows") == 1);
    CHECK(stats.at("entities_rows") == 2);
    CHECK(stats.at("chunks_rows") == 2);
    CHECK(stats.at("context_tokens") == doc.token_count());
    CHECK(doc.token_count() == count_tokens(doc.render()));
}

// ============================================================================
// The token budget
// ============================================================================

TEST_CASE("the rendered document never exceeds the token budget") {
    RenderWorld world;
    const std::size_t full = build_context(world.fusion, world.graph, world.corpus, 100000)
                                 .token_count();
    for (int budget : {0, 1, 5, 10, 20, 40, 80, int(full), int(full) + 5}) {
        const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, budget);
        CHECK(doc.token_count() <= std::size_t(budget));
    }
}

TEST_CASE("trimming drops chunks first, semantic units last") {
    RenderWorld world;
    const ContextDocument full = build_context(world.fusion, world.graph, world.corpus, 100000);

    // Tighten the budget one step below the full size: the chunk section
    // must shrink first while every other section is intact.
    const int budget = int(full.token_count()) - 1;
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, budget);
    CHECK(doc.stats().at("chunks_rows") < full.stats().at("chunks_rows"));
    CHECK(doc.stats().at("entities_rows") == full.stats().at("entities_rows"));
    CHECK(doc.stats().at("relations_rows") == full.stats().at("relations_rows"));
    CHECK(doc.stats().at("semantic_units_rows") == full.stats().at("semantic_units_rows"));

    // A budget that only fits the semantic unit section keeps exactly it.
    FusionInputs sus_only;
    sus_only.sus = world.fusion.sus;
    const std::size_t su_size =
        build_context(sus_only, world.graph, world.corpus, 100000).token_count();
    const ContextDocument tiny =
        build_context(world.fusion, world.graph, world.corpus, int(su_size));
    CHECK(tiny.stats().at("chunks_rows") == 0);
    CHECK(tiny.stats().at("entities_rows") == 0);
    CHECK(tiny.stats().at("relations_rows") == 0);
    CHECK(tiny.stats().at("semantic_units_rows") == 1);

    // Budget zero drops everything down to the empty document.
    const ContextDocument none = build_context(world.fusion, world.graph, world.corpus, 0);
    CHECK(none.empty());
    CHECK(none.token_count() == 0);
    CHECK(none.render().empty());
}

// ============================================================================
// Answer generation
// ============================================================================

TEST_CASE("the answer request carries the query and the rendered context") {
    RenderWorld world;
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, 100000);
    const CompletionRequest req = make_answer_request("Why?", doc);
    CHECK(req.task == TaskTag::answer_gen);
    REQUIRE(req.sections.size() == 2);
    CHECK(req.sections[0].name == "query");
    CHECK(req.sections[0].text == "Why?");
    CHECK(req.sections[1].name == "context");
    CHECK(req.sections[1].text == doc.render());
}

TEST_CASE("generate_answer returns the completion with per-call usage") {
    RenderWorld world;
    const ContextDocument doc = build_context(world.fusion, world.graph, world.corpus, 100000);
    auto backend = std::make_unique<CallbackBackend>(
        [](const CompletionRequest& req) -> CompletionResult {
            REQUIRE(req.task == TaskTag::answer_gen);
            return {"Because the context says so.", 200, 30};
        },
        17, 8);
    Provider provider(std::move(backend), PriceTable{}, 1);

    const AnswerResult result = generate_answer(provider, "Why?", doc);
    CHECK(result.text == "Because the context says so.");
    CHECK(result.usage.prompt_tokens == 200);
    CHECK(result.usage.completion_tokens == 30);
    CHECK(result.context_stats.at("context_tokens") == doc.token_count());
}

TEST_CASE("an empty context is a contract violation") {
    RenderWorld world;
    const ContextDocument empty = build_context(FusionInputs{}, world.graph, world.corpus, 1000);
    auto backend = std::make_unique<CallbackBackend>(
        [](const CompletionRequest&) -> CompletionResult { return {"x", 1, 1}; }, 17, 8);
    Provider provider(std::move(backend), PriceTable{}, 1);
    CHECK_THROWS_AS(generate_answer(provider, "Why?", empty), Error);
}
