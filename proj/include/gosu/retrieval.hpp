#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gosu/corpus.hpp"
#include "gosu/graph.hpp"
#include "gosu/provider.hpp"
#include "gosu/vector_index.hpp"

namespace gosu {

// Three-level decomposition of a question: concrete entity names, event- or
// fact-level phrases, abstract themes. Deduplicated per tier, order kept.
struct KeywordTriple {
    std::vector<std::string> low;
    std::vector<std::string> sem;
    std::vector<std::string> high;
    bool parse_failed = false;  // completion was unusable; all tiers empty
};

struct Budgets {
    int top_k_match = 10;     // similarity hits considered per keyword
    int su_sufficiency = 5;   // target number of semantic units after completion
    int graph_budget = 60;    // max graph rows after fusion (before endpoint repairs)
    int chunk_budget = 10;    // max chunk rows after fusion

    void validate() const;
};

struct LayerFlags {
    bool entity_layer = true;
    bool relation_layer = true;
    bool su_layer = true;
};

struct ScoredKey {
    std::string key;
    double score = 0.0;
};

struct ScoredRelation {
    std::pair<std::string, std::string> endpoints;
    double score = 0.0;
};

// What one retrieval tier found: ranked matches plus everything they pull in.
struct RetrievalBundle {
    std::vector<ScoredKey> entities;
    std::vector<ScoredRelation> relations;
    std::vector<ScoredKey> chunks;
    std::vector<std::string> sus;

    bool empty() const noexcept {
        return entities.empty() && relations.empty() && chunks.empty() && sus.empty();
    }
};

// Graph additions contributed by semantic-unit expansion (score-free).
struct Expansion {
    std::vector<std::string> entities;
    std::vector<std::pair<std::string, std::string>> relations;
    std::vector<std::string> chunks;
};

// One row of the fused graph table; either an entity or a relation.
struct GraphRow {
    bool is_relation = false;
    std::string key;       // entity key, or relation_key(src, dst)
    std::string src, dst;  // set for relation rows
    double score = 0.0;
    long degree = 0;
};

// The final, trimmed material handed to context building.
struct FusionInputs {
    std::vector<std::string> sus;
    std::vector<GraphRow> graph_rows;
    std::vector<std::string> chunks;
    int endpoint_repairs = 0;  // entity rows added over budget to keep edges closed

    bool empty() const noexcept { return sus.empty() && graph_rows.empty() && chunks.empty(); }
};

CompletionRequest make_keyword_request(const std::string& query);

class Retriever {
public:
    Retriever(const KnowledgeGraph& graph, const VectorIndex& index, const CorpusStore& corpus,
              Provider& provider);

    // One completion; an unusable completion yields an empty, flagged triple
    // rather than an error.
    KeywordTriple extract_keywords(const std::string& query, Phase phase = Phase::query);

    // Entity tier: low keywords against the entity index. Matched entities
    // (positive accumulated score, ranked) pull in incident relations, their
    // source chunks, the other endpoints, and attached semantic units.
    RetrievalBundle retrieve_low(std::span<const std::string> low_keywords,
                                 const Budgets& budgets, Phase phase = Phase::query);

    // Relation tier: high keywords against the relation index; mirrors the
    // entity tier from the edge side.
    RetrievalBundle retrieve_high(std::span<const std::string> high_keywords,
                                  const Budgets& budgets, Phase phase = Phase::query);

    // Semantic-unit completion: the union of tier-attached units (low order
    // first, then high, deduplicated) is topped up with sem-phrase
    // similarity hits until su_sufficiency is reached. The base is always a
    // prefix of the result; |result| <= max(su_sufficiency, |base|).
    std::vector<std::string> complete_sus(std::span<const std::string> sem_phrases,
                                          std::span<const std::string> sus_low,
                                          std::span<const std::string> sus_high,
                                          const Budgets& budgets, Phase phase = Phase::query);

    // Expands units into member entities, unit-cited relations, and source
    // chunks (graph/chunk additions carry no retrieval score).
    Expansion expand_sus(std::span<const std::string> s_all) const;

    // Fusion: merge tier bundles and expansion, dedupe with summed scores,
    // rank (score desc, degree desc, key asc), trim graph rows to
    // graph_budget and chunks to chunk_budget. Endpoints of surviving
    // relation rows are pulled back in over budget and counted as repairs.
    FusionInputs fuse(const RetrievalBundle& low, const RetrievalBundle& high,
                      std::span<const std::string> sus, const Expansion& expansion,
                      const Budgets& budgets) const;

    // The full query path. Disabled layers contribute empty bundles; with
    // the SU layer off, the unit list is just the tier union and expansion
    // is skipped. Throws NoContextError when every layer is disabled or the
    // fusion comes out empty.
    FusionInputs retrieve(const std::string& query, const LayerFlags& flags,
                          const Budgets& budgets, Phase phase = Phase::query);

private:
    const KnowledgeGraph& graph_;
    const VectorIndex& index_;
    const CorpusStore& corpus_;
    Provider& provider_;
};

}  // namespace gosu
