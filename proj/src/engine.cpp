#include "gosu/engine.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <span>
#include <tuple>
#include <utility>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"
#include "json.hpp"

namespace gosu {

using nlohmann::json;

namespace {

constexpr std::size_t kEmbedBatch = 64;

// Wraps a pipeline stage so failures carry their stage label. Fixture misses
// pass through untouched: their message already lists every fingerprint and
// callers want the concrete type.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const FixtureMissingError&) {
        throw;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& ex) {
        throw StageError(name, ex.what());
    }
}

bool usage_record_less(const UsageRecord& a, const UsageRecord& b) {
    return std::tie(a.phase, a.task, a.prompt_tokens, a.completion_tokens, a.embedding_tokens) <
           std::tie(b.phase, b.task, b.prompt_tokens, b.completion_tokens, b.embedding_tokens);
}

// Text an entity/relation row is embedded over; keys and keywords first so
// short query keywords land near their targets.
std::string entity_embed_text(const EntityNode& entity) {
    return entity.entity_key + "\n" + entity.entity_type + "\n" +
           join(entity.descriptions, " | ");
}

std::string relation_embed_text(const RelationEdge& relation) {
    return relation.src + "\n" + relation.dst + "\n" + join(relation.keywords, ", ") + "\n" +
           join(relation.descriptions, " | ");
}

// Embeds `texts` in fixed-size batches and hands (index, vector) pairs to
// `sink`, preserving input order. Batch boundaries, and therefore usage
// records, do not depend on worker parallelism.
void embed_in_batches(Provider& provider, const std::vector<std::string>& texts,
                      const std::function<void(std::size_t, std::vector<float>)>& sink) {
    for (std::size_t at = 0; at < texts.size(); at += kEmbedBatch) {
        const std::size_t end = std::min(texts.size(), at + kEmbedBatch);
        std::vector<std::string> batch(texts.begin() + at, texts.begin() + end);
        auto vectors = provider.embed(batch, Phase::build);
        for (std::size_t i = 0; i < vectors.size(); ++i) sink(at + i, std::move(vectors[i]));
    }
}

}  // namespace

// ============================================================================
// Manifest
// ============================================================================

std::string manifest_to_json(const BuildManifest& manifest) {
    json doc;
    doc["config_hash"] = manifest.config_hash;
    doc["corpus_hash"] = manifest.corpus_hash;
    json& counts = doc["counts"];
    counts["documents"] = manifest.counts.documents;
    counts["chunks"] = manifest.counts.chunks;
    counts["candidates"] = manifest.counts.candidates;
    counts["semantic_units"] = manifest.counts.semantic_units;
    counts["entities"] = manifest.counts.entities;
    counts["relations"] = manifest.counts.relations;
    counts["su_nodes"] = manifest.counts.su_nodes;
    counts["memberships"] = manifest.counts.memberships;
    doc["embed_dim"] = manifest.embed_dim;
    doc["optimizer_enabled"] = manifest.optimizer_enabled;
    json& usage = doc["usage"]["build"];
    usage["prompt_tokens"] = manifest.build_prompt_tokens;
    usage["completion_tokens"] = manifest.build_completion_tokens;
    usage["embedding_tokens"] = manifest.build_embedding_tokens;
    usage["usd"] = manifest.build_usd;
    return doc.dump(2) + "\n";
}

BuildManifest manifest_from_json(const std::string& text) {
    const json doc = json::parse(text);
    BuildManifest manifest;
    manifest.config_hash = doc.at("config_hash").get<std::string>();
    manifest.corpus_hash = doc.at("corpus_hash").get<std::string>();
    const json& counts = doc.at("counts");
    manifest.counts.documents = counts.at("documents").get<long>();
    manifest.counts.chunks = counts.at("chunks").get<long>();
    manifest.counts.candidates = counts.at("candidates").get<long>();
    manifest.counts.semantic_units = counts.at("semantic_units").get<long>();
    manifest.counts.entities = counts.at("entities").get<long>();
    manifest.counts.relations = counts.at("relations").get<long>();
    manifest.counts.su_nodes = counts.at("su_nodes").get<long>();
    manifest.counts.memberships = counts.at("memberships").get<long>();
    manifest.embed_dim = doc.at("embed_dim").get<int>();
    manifest.optimizer_enabled = doc.at("optimizer_enabled").get<bool>();
    const json& usage = doc.at("usage").at("build");
    manifest.build_prompt_tokens = usage.at("prompt_tokens").get<long>();
    manifest.build_completion_tokens = usage.at("completion_tokens").get<long>();
    manifest.build_embedding_tokens = usage.at("embedding_tokens").get<long>();
    manifest.build_usd = usage.at("usd").get<double>();
    return manifest;
}

void save_manifest(const std::filesystem::path& file, const BuildManifest& manifest) {
    write_text_file(file, manifest_to_json(manifest));
}

BuildManifest load_manifest(const std::filesystem::path& file) {
    return manifest_from_json(read_text_file(file));
}

// ============================================================================
// Build pipeline
// ============================================================================

BuildManifest build_engine(const std::filesystem::path& corpus_path, const EngineConfig& config,
                           Provider& provider) {
    config.validate();
    const DataLayout layout{config.data_dir};
    const int workers = provider.parallelism();

    const std::vector<Document> docs = stage("corpus", [&] {
        std::vector<Document> loaded = load_corpus(corpus_path);
        if (loaded.empty()) throw Error("corpus is empty: " + corpus_path.string());
        std::sort(loaded.begin(), loaded.end(),
                  [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
        for (std::size_t i = 1; i < loaded.size(); ++i) {
            if (loaded[i].doc_id == loaded[i - 1].doc_id) {
                throw Error("duplicate doc_id in corpus: " + loaded[i].doc_id);
            }
        }
        return loaded;
    });

    CorpusStore corpus;
    stage("chunking", [&] {
        for (const Document& doc : docs) {
            for (Chunk& chunk : doc_split(doc, config.chunking)) corpus.add(std::move(chunk));
        }
    });

    VectorIndex index;
    stage("embed_chunks", [&] {
        std::vector<std::string> texts;
        texts.reserve(corpus.size());
        for (const Chunk& chunk : corpus.chunks()) texts.push_back(chunk.text);
        embed_in_batches(provider, texts, [&](std::size_t i, std::vector<float> vec) {
            index.upsert(IndexKind::chunk, corpus.chunks()[i].chunk_id, vec);
        });
    });

    std::vector<std::vector<SemanticUnitCandidate>> per_chunk(corpus.size());
    stage("su_extract", [&] {
        parallel_for(corpus.size(), workers, [&](std::size_t i) {
            per_chunk[i] = extract_su_candidates(provider, corpus.chunks()[i], Phase::build);
        });
    });
    const std::vector<SemanticUnitCandidate> pool = pool_candidates(per_chunk);

    const OptimizeResult optimized = stage("su_optimize", [&] {
        return optimize_global(provider, pool, config.optimizer, corpus, index, Phase::build);
    });

    std::vector<ExtractionSet> pre_kg(corpus.size());
    stage("pre_kg", [&] {
        parallel_for(corpus.size(), workers, [&](std::size_t i) {
            pre_kg[i] = extract_pre_kg(provider, corpus.chunks()[i], Phase::build);
        });
    });

    std::vector<Subgraph> subgraphs(optimized.units.size());
    stage("su_entrel", [&] {
        parallel_for(optimized.units.size(), workers, [&](std::size_t i) {
            const SemanticUnit& unit = optimized.units[i];
            subgraphs[i] = build_subgraph(
                unit, extract_su_entities_relations(provider, unit, corpus, Phase::build));
        });
    });

    const KnowledgeGraph graph = stage("assemble", [&] {
        KnowledgeGraph assembled = assemble(pre_kg, subgraphs);
        validate_graph(assembled);
        return assembled;
    });

    stage("embed_graph", [&] {
        std::vector<std::string> keys;
        std::vector<std::string> texts;
        for (const auto& [key, entity] : graph.entities) {  // map order: deterministic
            keys.push_back(key);
            texts.push_back(entity_embed_text(entity));
        }
        embed_in_batches(provider, texts, [&](std::size_t i, std::vector<float> vec) {
            index.upsert(IndexKind::entity, keys[i], vec);
        });

        keys.clear();
        texts.clear();
        for (const auto& [endpoints, relation] : graph.relations) {
            keys.push_back(relation_key(endpoints.first, endpoints.second));
            texts.push_back(relation_embed_text(relation));
        }
        embed_in_batches(provider, texts, [&](std::size_t i, std::vector<float> vec) {
            index.upsert(IndexKind::relation, keys[i], vec);
        });

        // Units were embedded during extraction/refinement; reuse those rows.
        for (const SemanticUnit& unit : optimized.units) {
            index.upsert(IndexKind::su, unit.su_id, unit.embedding);
        }
    });

    stage("persist", [&] {
        corpus.save_jsonl(layout.chunks_file());
        save_semantic_units_jsonl(layout.units_file(), optimized.units);
        save_merge_log_jsonl(layout.merge_log_file(), optimized.rounds);
        save_graph(layout.graph_dir(), graph);
        index.save(layout.index_dir());
    });

    BuildManifest manifest;
    manifest.counts.documents = static_cast<long>(docs.size());
    manifest.counts.chunks = static_cast<long>(corpus.size());
    manifest.counts.candidates = static_cast<long>(pool.size());
    manifest.counts.semantic_units = static_cast<long>(optimized.units.size());
    manifest.counts.entities = static_cast<long>(graph.entities.size());
    manifest.counts.relations = static_cast<long>(graph.relations.size());
    manifest.counts.su_nodes = static_cast<long>(graph.su_nodes.size());
    manifest.counts.memberships = static_cast<long>(graph.memberships.size());
    manifest.corpus_hash = corpus_hash(docs);
    manifest.config_hash = config_hash(config);
    manifest.optimizer_enabled = config.optimizer.enabled;
    manifest.embed_dim = provider.dimension();
    const ProviderUsage usage = provider.usage_snapshot(Phase::build);
    manifest.build_prompt_tokens = usage.prompt_tokens;
    manifest.build_completion_tokens = usage.completion_tokens;
    manifest.build_embedding_tokens = usage.embedding_tokens;
    manifest.build_usd = usage.usd_cost;

    stage("persist", [&] {
        save_manifest(layout.manifest_file(), manifest);
        // The in-memory log order depends on worker scheduling; a canonical
        // sort makes the persisted artifact byte-stable. Totals are order-free.
        std::vector<UsageRecord> records = provider.usage_log();
        std::sort(records.begin(), records.end(), usage_record_less);
        save_usage_jsonl(layout.usage_file(), records);
    });
    return manifest;
}

// ============================================================================
// Loaded engine
// ============================================================================

Engine::Engine(EngineConfig config, std::shared_ptr<Provider> provider)
    : config_(std::move(config)), provider_(std::move(provider)), layout_{config_.data_dir} {
    config_.validate();
    if (!std::filesystem::exists(layout_.manifest_file())) {
        throw Error("no built engine under " + layout_.root.string() +
                    " (manifest missing) — run `gosu build` first");
    }
    manifest_ = load_manifest(layout_.manifest_file());
    corpus_ = CorpusStore::load_jsonl(layout_.chunks_file());
    graph_ = load_graph(layout_.graph_dir());
    index_ = VectorIndex::load(layout_.index_dir());
    retriever_ = std::make_unique<Retriever>(graph_, index_, corpus_, *provider_);
    // Rows already in the provider's log predate this attachment (a build in
    // this process persists its own); only rows from here on are ours to append.
    persisted_usage_ = provider_->usage_log().size();
}

PreparedQuery Engine::prepare(const std::string& question, const LayerFlags& flags) {
    PreparedQuery out;
    out.fusion = retriever_->retrieve(question, flags, config_.budgets, Phase::query);
    out.context = build_context(out.fusion, graph_, corpus_,
                                static_cast<int>(config_.context_token_budget));
    return out;
}

QueryResult Engine::query(const std::string& question, const LayerFlags& flags) {
    const ProviderUsage before = provider_->usage_snapshot(Phase::query);
    try {
        PreparedQuery prepared = prepare(question, flags);
        AnswerResult answer = generate_answer(*provider_, question, prepared.context, Phase::query);

        const ProviderUsage after = provider_->usage_snapshot(Phase::query);
        QueryResult result;
        result.answer = std::move(answer.text);
        result.context_text = prepared.context.render();
        result.context_stats = std::move(answer.context_stats);
        result.usage.phase = Phase::query;
        result.usage.prompt_tokens = after.prompt_tokens - before.prompt_tokens;
        result.usage.completion_tokens = after.completion_tokens - before.completion_tokens;
        result.usage.embedding_tokens = after.embedding_tokens - before.embedding_tokens;
        result.usage.usd_cost = after.usd_cost - before.usd_cost;

        ++query_count_;
        append_new_usage();
        return result;
    } catch (...) {
        // Even a failed query consumed tokens; the log stays truthful.
        append_new_usage();
        throw;
    }
}

void Engine::append_new_usage() {
    std::lock_guard<std::mutex> lock(usage_mu_);
    const std::vector<UsageRecord> log = provider_->usage_log();
    if (log.size() <= persisted_usage_) return;
    append_usage_jsonl(layout_.usage_file(),
                       std::span<const UsageRecord>(log).subspan(persisted_usage_));
    persisted_usage_ = log.size();
}

std::string Engine::stats_json() const {
    json doc = json::parse(manifest_to_json(manifest_));
    json session;
    for (Phase phase : {Phase::build, Phase::query}) {
        const ProviderUsage usage = provider_->usage_snapshot(phase);
        json& row = session[to_string(phase)];
        row["prompt_tokens"] = usage.prompt_tokens;
        row["completion_tokens"] = usage.completion_tokens;
        row["embedding_tokens"] = usage.embedding_tokens;
        row["usd"] = usage.usd_cost;
    }
    doc["session_usage"] = session;
    doc["query_count"] = query_count_.load();
    return doc.dump(2) + "\n";
}

}  // namespace gosu
