#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gosu/config.hpp"
#include "gosu/corpus.hpp"
#include "gosu/generation.hpp"
#include "gosu/graph.hpp"
#include "gosu/provider.hpp"
#include "gosu/retrieval.hpp"
#include "gosu/semantic_units.hpp"
#include "gosu/vector_index.hpp"

namespace gosu {

// On-disk layout shared by build, query, serve, and the tests. Everything
// the engine persists lives under one data_dir.
struct DataLayout {
    std::filesystem::path root;

    std::filesystem::path chunks_file() const { return root / "chunks" / "chunks.jsonl"; }
    std::filesystem::path units_file() const {
        return root / "semantic_units" / "semantic_units.jsonl";
    }
    std::filesystem::path merge_log_file() const {
        return root / "semantic_units" / "merge_log.jsonl";
    }
    std::filesystem::path graph_dir() const { return root / "graph"; }
    std::filesystem::path index_dir() const { return root / "index"; }
    std::filesystem::path manifest_file() const { return root / "manifest" / "manifest.json"; }
    std::filesystem::path usage_file() const { return root / "usage" / "usage.jsonl"; }
};

struct BuildCounts {
    long documents = 0;
    long chunks = 0;
    long candidates = 0;      // pooled, pre-optimization
    long semantic_units = 0;  // post-optimization
    long entities = 0;
    long relations = 0;
    long su_nodes = 0;
    long memberships = 0;

    bool operator==(const BuildCounts&) const = default;
};

// What a build run records about itself. Deliberately timestamp-free: two
// builds of the same corpus+config+fixtures write byte-identical manifests.
struct BuildManifest {
    BuildCounts counts;
    std::string corpus_hash;
    std::string config_hash;
    bool optimizer_enabled = true;
    int embed_dim = 0;
    long build_prompt_tokens = 0;
    long build_completion_tokens = 0;
    long build_embedding_tokens = 0;
    double build_usd = 0.0;
};

std::string manifest_to_json(const BuildManifest& manifest);
BuildManifest manifest_from_json(const std::string& text);
void save_manifest(const std::filesystem::path& file, const BuildManifest& manifest);
BuildManifest load_manifest(const std::filesystem::path& file);

// The full build pipeline: corpus -> chunks -> chunk embeddings -> unit
// candidates -> global optimization -> chunk-level extraction ->
// unit-conditioned extraction -> assembly -> graph embeddings -> persist.
// Every artifact lands under config.data_dir; failures carry their stage
// label, and missing fixtures are reported all at once per fan-out.
BuildManifest build_engine(const std::filesystem::path& corpus_path, const EngineConfig& config,
                           Provider& provider);

// Retrieval output for one question, before the answer completion. Exposed
// separately so --dump-context (and fixture authoring) can see the exact
// context the answer call receives.
struct PreparedQuery {
    FusionInputs fusion;
    ContextDocument context;
};

struct QueryResult {
    std::string answer;
    std::string context_text;
    std::map<std::string, std::size_t> context_stats;
    ProviderUsage usage;  // query-phase delta across this call
};

// A loaded, immutable engine snapshot serving queries. Query usage is
// appended to the persisted usage log as it accrues.
class Engine {
public:
    // Loads every artifact from config.data_dir; throws if nothing was built.
    Engine(EngineConfig config, std::shared_ptr<Provider> provider);

    PreparedQuery prepare(const std::string& question, const LayerFlags& flags);
    QueryResult query(const std::string& question, const LayerFlags& flags);

    const BuildManifest& manifest() const noexcept { return manifest_; }
    const EngineConfig& config() const noexcept { return config_; }
    const KnowledgeGraph& graph() const noexcept { return graph_; }
    Provider& provider() noexcept { return *provider_; }
    long query_count() const noexcept { return query_count_.load(); }

    // Manifest plus this process's cumulative usage and query counter; the
    // body served by /stats.
    std::string stats_json() const;

private:
    void append_new_usage();

    EngineConfig config_;
    std::shared_ptr<Provider> provider_;
    DataLayout layout_;
    CorpusStore corpus_;
    KnowledgeGraph graph_;
    VectorIndex index_;
    BuildManifest manifest_;
    std::unique_ptr<Retriever> retriever_;
    std::atomic<long> query_count_{0};
    std::mutex usage_mu_;
    std::size_t persisted_usage_ = 0;
};

}  // namespace gosu
