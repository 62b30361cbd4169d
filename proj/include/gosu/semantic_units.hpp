#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gosu/corpus.hpp"
#include "gosu/provider.hpp"
#include "gosu/vector_index.hpp"

namespace gosu {

// One self-contained statement extracted from a single chunk, before global
// optimization. cand_id is a content hash of (name, description) so identical
// statements pool into one candidate no matter where they came from.
struct SemanticUnitCandidate {
    std::string cand_id;
    std::string name;
    std::string description;
    std::set<std::string> source_chunk_ids;
    std::vector<float> embedding;
};

// A connected component of merge-confirmed candidates.
struct MergeGroup {
    std::vector<std::string> members;  // cand ids, ascending
    std::vector<std::pair<std::string, std::string>> pair_evidence;  // confirmed pairs inside
};

// Globally deduplicated unit. merged_from lists the original candidate ids
// that were folded into it; chunk provenance is their union, always.
struct SemanticUnit {
    std::string su_id;
    std::string name;
    std::string description;
    std::set<std::string> chunk_ids;
    std::set<std::string> merged_from;
    std::vector<float> embedding;
    bool refine_fallback = false;  // refinement came back unusable; kept verbatim
};

struct OptimizerConfig {
    bool enabled = true;
    double sim_tau = 0.85;
    int evidence_budget = 5;
    int max_rounds = 2;

    void validate() const;
};

// Per-round trace of what the optimizer did; persisted as merge_log.jsonl.
struct MergeRoundLog {
    int round = 0;
    std::size_t units_in = 0;
    std::size_t coarse_pair_count = 0;
    std::vector<std::pair<std::string, std::string>> confirmed;
    int ambiguous = 0;
    std::vector<std::vector<std::string>> groups;
    std::size_t merged_groups = 0;
};

// ============================================================================
// Identities
// ============================================================================

// Content hash over whitespace-collapsed, case-folded (name, description).
std::string candidate_id(std::string_view name, std::string_view description);

// Stable unit id from the set of original candidate ids it absorbed.
std::string semantic_unit_id(const std::set<std::string>& merged_from);

// ============================================================================
// Request builders (single source of truth for payload shapes; fixture
// authoring uses the same builders, so stored fingerprints always match)
// ============================================================================

CompletionRequest make_su_extract_request(const Chunk& chunk);
CompletionRequest make_su_judge_request(const SemanticUnitCandidate& a,
                                        const SemanticUnitCandidate& b);
CompletionRequest make_su_refine_request(std::span<const SemanticUnitCandidate> members,
                                         std::span<const Chunk> evidence);

// ============================================================================
// Pipeline operations
// ============================================================================

// Candidate extraction for one chunk: one completion, candidates embedded in
// a single batch. Malformed records are dropped; never fatal.
std::vector<SemanticUnitCandidate> extract_su_candidates(Provider& provider, const Chunk& chunk,
                                                         Phase phase);

// Flattens per-chunk candidate lists, pooling exact duplicates (same
// normalized name+description) with unioned chunk provenance. Ascending
// cand_id order.
std::vector<SemanticUnitCandidate> pool_candidates(
    const std::vector<std::vector<SemanticUnitCandidate>>& per_chunk);

// All unordered pool pairs whose embedding cosine clears sim_tau, as
// (smaller id, larger id), ascending. Exact and symmetric.
std::vector<std::pair<std::string, std::string>> coarse_pairs(
    std::span<const SemanticUnitCandidate> pool, double sim_tau);

struct FinePairsResult {
    std::vector<std::pair<std::string, std::string>> confirmed;  // judge said YES
    int ambiguous = 0;  // unparseable judgments, conservatively treated as NO
};

// LLM merge judgment for every surviving pair. Order of the result follows
// the input pair order regardless of worker scheduling.
FinePairsResult fine_pairs(Provider& provider, std::span<const SemanticUnitCandidate> pool,
                           std::span<const std::pair<std::string, std::string>> pairs, Phase phase);

// Connected components over confirmed pairs; every candidate lands in
// exactly one group. Groups ordered by their smallest member id.
std::vector<MergeGroup> cluster_dedup(std::span<const SemanticUnitCandidate> pool,
                                      std::span<const std::pair<std::string, std::string>> confirmed);

// Evidence chunks for a merge group: every source chunk of every member
// (id hits, ordered by chunk_id, never evicted), then similarity-ranked
// chunks against the group centroid until evidence_budget is reached.
// |result| <= max(evidence_budget, #id hits).
std::vector<Chunk> gather_evidence(const MergeGroup& group,
                                   std::span<const SemanticUnitCandidate> pool,
                                   int evidence_budget, const CorpusStore& corpus,
                                   const VectorIndex& chunk_index);

// One refinement completion for a group. An unusable completion (empty, or
// no valid record) falls back to the lexicographically-first member's text
// verbatim, flagged. Chunk provenance is the union of member provenance in
// every case. The returned unit's embedding is left empty; callers decide
// whether to re-embed or reuse.
SemanticUnit global_refine(Provider& provider, const MergeGroup& group,
                           std::span<const SemanticUnitCandidate> pool,
                           std::span<const Chunk> evidence, Phase phase);

struct OptimizeResult {
    std::vector<SemanticUnit> units;  // ascending su_id
    std::vector<MergeRoundLog> rounds;
};

// The full global optimization loop: coarse filter, pairwise judgments,
// clustering, evidence-backed refinement — repeated until a round merges
// nothing or max_rounds is hit. Disabled => candidates promoted verbatim,
// zero provider calls. Only multi-member groups are refined; singletons
// carry through unchanged.
OptimizeResult optimize_global(Provider& provider, std::vector<SemanticUnitCandidate> pool,
                               const OptimizerConfig& config, const CorpusStore& corpus,
                               const VectorIndex& chunk_index, Phase phase);

// ============================================================================
// Persistence
// ============================================================================

void save_semantic_units_jsonl(const std::filesystem::path& file,
                               std::span<const SemanticUnit> units);
std::vector<SemanticUnit> load_semantic_units_jsonl(const std::filesystem::path& file);
void save_merge_log_jsonl(const std::filesystem::path& file,
                          std::span<const MergeRoundLog> rounds);

}  // namespace gosu
