#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gosu/corpus.hpp"
#include "gosu/graph.hpp"
#include "gosu/provider.hpp"
#include "gosu/retrieval.hpp"

namespace gosu {

// One rendered context section: a [name] banner, a column header, and one
// tab-separated row per item. Empty sections disappear from the render.
struct ContextSection {
    std::string name;
    std::string column_header;
    std::vector<std::string> rows;
};

// Sections in fixed order: semantic_units, relations, entities, chunks.
// Truncation drops rows from the back of the lowest-priority section first
// (chunks, then entities, then relations, then semantic units).
struct ContextDocument {
    std::vector<ContextSection> sections;

    std::string render() const;
    std::size_t token_count() const;  // tokens of render(), by the engine tokenizer

    // Per-section row counts plus the total token count; the stats attached
    // to every answer.
    std::map<std::string, std::size_t> stats() const;

    bool empty() const noexcept;
};

// Renders fused retrieval material into the sectioned document, then trims
// rows until the rendered token count fits the budget. Postcondition:
// token_count() <= token_budget, for every input.
ContextDocument build_context(const FusionInputs& fusion, const KnowledgeGraph& graph,
                              const CorpusStore& corpus, int token_budget);

CompletionRequest make_answer_request(const std::string& query, const ContextDocument& context);

struct AnswerResult {
    std::string text;
    ProviderUsage usage;  // delta for the answer completion alone
    std::map<std::string, std::size_t> context_stats;
};

// One answer completion grounded in the context document. An empty context
// is a contract violation (retrieval throws NoContextError before this);
// provider failures are rethrown with the context stats in the message.
AnswerResult generate_answer(Provider& provider, const std::string& query,
                             const ContextDocument& context, Phase phase = Phase::query);

}  // namespace gosu
