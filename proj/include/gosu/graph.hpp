#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gosu/corpus.hpp"
#include "gosu/provider.hpp"
#include "gosu/semantic_units.hpp"

namespace gosu {

// (chunk_id, su_id) provenance pair; su_id is empty for chunk-level
// extraction. The set of these pairs is the sole source of relation weight.
using Provenance = std::pair<std::string, std::string>;

// Identity is entity_key: uppercased, whitespace-collapsed, outer punctuation
// stripped. Descriptions are kept as provenance-ordered distinct segments and
// joined with a separator when rendered.
struct EntityNode {
    std::string entity_key;
    std::string display_name;
    std::string entity_type;
    std::vector<std::string> descriptions;
    std::set<std::string> source_chunk_ids;
    std::set<std::string> su_ids;
    std::vector<float> embedding;

    bool operator==(const EntityNode&) const = default;
};

// Undirected edge; src < dst always. weight == |provenance| by construction
// after every assembly, never an accumulated sum.
struct RelationEdge {
    std::string src;
    std::string dst;
    std::vector<std::string> descriptions;
    std::vector<std::string> keywords;
    long weight = 0;
    std::set<Provenance> provenance;
    std::vector<float> embedding;

    bool operator==(const RelationEdge&) const = default;
};

struct SUNode {
    std::string su_id;
    std::string name;
    std::string description;
    std::set<std::string> chunk_ids;
    std::set<std::string> member_entity_keys;
    bool empty_extraction = false;  // extraction produced no entities; kept, flagged
    std::vector<float> embedding;

    bool operator==(const SUNode&) const = default;
};

// Raw output of one extraction call (or a fold of several).
struct ExtractionSet {
    std::vector<EntityNode> entities;
    std::vector<RelationEdge> relations;
};

// One semantic unit with its deduplicated local entities and relations.
struct Subgraph {
    SUNode su_node;
    ExtractionSet parts;
};

struct KnowledgeGraph {
    std::map<std::string, EntityNode> entities;
    std::map<std::pair<std::string, std::string>, RelationEdge> relations;
    std::map<std::string, SUNode> su_nodes;
    std::set<std::pair<std::string, std::string>> memberships;  // (su_id, entity_key)

    // Incident relation edges plus memberships; the degree used for ranking.
    long entity_degree(const std::string& entity_key) const;
    std::vector<std::pair<std::string, std::string>> incident_relations(
        const std::string& entity_key) const;

    bool operator==(const KnowledgeGraph&) const = default;
};

// Key used for relation rows in indexes and rankings.
std::string relation_key(const std::string& src, const std::string& dst);

// Uppercase, collapse internal whitespace, trim, strip outer punctuation.
// Returns "" for names that normalize away entirely (caller drops those).
std::string normalize_entity_key(std::string_view raw);

// ============================================================================
// Request builders (shared with fixture authoring)
// ============================================================================

CompletionRequest make_pre_kg_request(const Chunk& chunk);
CompletionRequest make_su_entrel_request(const SemanticUnit& unit, const Chunk& chunk);

// ============================================================================
// Extraction
// ============================================================================

// Chunk-level entity/relation extraction. Dangling relation endpoints are
// repaired with stub entities; self-loops and empty names are dropped.
ExtractionSet extract_pre_kg(Provider& provider, const Chunk& chunk, Phase phase);

// SU-conditioned extraction over every source chunk of the unit (ascending
// chunk_id), folded into one set with (chunk_id, su_id) provenance.
ExtractionSet extract_su_entities_relations(Provider& provider, const SemanticUnit& unit,
                                            const CorpusStore& corpus, Phase phase);

// Wraps a unit's extraction into a subgraph: SU node, member entities, local
// relations. Zero entities => node kept with empty_extraction flagged.
Subgraph build_subgraph(const SemanticUnit& unit, ExtractionSet extraction);

// ============================================================================
// Assembly
// ============================================================================

// Merges chunk-level extraction sets and SU subgraphs into one graph:
// entities unified by key, relations by unordered endpoint pair, relation
// weights recomputed from provenance, memberships emitted once per
// (su, entity). Idempotent: assembling a graph's own parts changes nothing.
KnowledgeGraph assemble(std::span<const ExtractionSet> pre_kg,
                        std::span<const Subgraph> subgraphs);

// Decomposes a graph back into assemble() inputs (for round-trips).
std::pair<std::vector<ExtractionSet>, std::vector<Subgraph>> graph_as_inputs(
    const KnowledgeGraph& graph);

// Referential integrity: relation endpoints and membership targets must
// exist; weights must equal provenance counts. Throws on violation.
void validate_graph(const KnowledgeGraph& graph);

// ============================================================================
// Persistence / export
// ============================================================================

// graph/{entities,relations,su_nodes,memberships}.jsonl under dir.
// Embeddings are not part of the graph files; they live in the index.
void save_graph(const std::filesystem::path& dir, const KnowledgeGraph& graph);
KnowledgeGraph load_graph(const std::filesystem::path& dir);

std::string to_graphml(const KnowledgeGraph& graph);

}  // namespace gosu
