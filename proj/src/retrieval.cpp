#include "gosu/retrieval.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"

namespace gosu {

void Budgets::validate() const {
    if (top_k_match < 0) throw ConfigError("top_k_match must be non-negative");
    if (su_sufficiency < 0) throw ConfigError("su_sufficiency must be non-negative");
    if (graph_budget < 0) throw ConfigError("graph_budget must be non-negative");
    if (chunk_budget < 0) throw ConfigError("chunk_budget must be non-negative");
}

CompletionRequest make_keyword_request(const std::string& query) {
    CompletionRequest req;
    req.task = TaskTag::keyword_extract;
    req.sections = {{"query", query}};
    return req;
}

Retriever::Retriever(const KnowledgeGraph& graph, const VectorIndex& index,
                     const CorpusStore& corpus, Provider& provider)
    : graph_(graph), index_(index), corpus_(corpus), provider_(provider) {}

namespace {

void push_dedup(std::vector<std::string>& list, std::set<std::string>& seen,
                const std::string& value) {
    if (value.empty()) return;
    if (seen.insert(value).second) list.push_back(value);
}

// (score desc, key asc) over an accumulator map.
std::vector<ScoredKey> ranked(const std::map<std::string, double>& scores) {
    std::vector<ScoredKey> out;
    out.reserve(scores.size());
    for (const auto& [key, score] : scores) out.push_back({key, score});
    std::sort(out.begin(), out.end(), [](const ScoredKey& a, const ScoredKey& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    });
    return out;
}

}  // namespace

KeywordTriple Retriever::extract_keywords(const std::string& query, Phase phase) {
    static const RecordSchema schema{{{"low", 2}, {"sem", 2}, {"high", 2}}};
    KeywordTriple triple;
    std::string completion;
    try {
        completion = provider_.complete(make_keyword_request(query), phase).text;
        const ParsedRecords records = parse_records(completion, schema);
        std::set<std::string> seen_low, seen_sem, seen_high;
        for (const auto& tuple : records.tuples) {
            if (tuple[0] == "low") push_dedup(triple.low, seen_low, tuple[1]);
            if (tuple[0] == "sem") push_dedup(triple.sem, seen_sem, tuple[1]);
            if (tuple[0] == "high") push_dedup(triple.high, seen_high, tuple[1]);
        }
    } catch (const NoTerminatorError&) {
        triple = KeywordTriple{};
        triple.parse_failed = true;
    }
    return triple;
}

RetrievalBundle Retriever::retrieve_low(std::span<const std::string> low_keywords,
                                        const Budgets& budgets, Phase phase) {
    budgets.validate();
    RetrievalBundle bundle;
    if (low_keywords.empty() || index_.size(IndexKind::entity) == 0) return bundle;

    std::vector<std::string> keywords(low_keywords.begin(), low_keywords.end());
    const auto vectors = provider_.embed(keywords, phase);

    // Accumulate positive similarity per entity across keywords.
    std::map<std::string, double> entity_score;
    for (const auto& v : vectors) {
        for (const RankedHit& hit :
             index_.sim_rank(IndexKind::entity, v, static_cast<std::size_t>(budgets.top_k_match))) {
            if (hit.score > 0.0) entity_score[hit.key] += hit.score;
        }
    }
    bundle.entities = ranked(entity_score);
    if (bundle.entities.empty()) return bundle;  // nothing above zero: empty bundle

    // Incident relations, scored by the matched endpoints they touch.
    std::map<std::pair<std::string, std::string>, double> relation_score;
    for (const auto& [pair, edge] : graph_.relations) {
        auto a = entity_score.find(pair.first);
        auto b = entity_score.find(pair.second);
        if (a == entity_score.end() && b == entity_score.end()) continue;
        double s = 0.0;
        if (a != entity_score.end()) s += a->second;
        if (b != entity_score.end()) s += b->second;
        relation_score[pair] = s;
    }
    for (const auto& [pair, score] : relation_score) bundle.relations.push_back({pair, score});
    std::sort(bundle.relations.begin(), bundle.relations.end(),
              [](const ScoredRelation& x, const ScoredRelation& y) {
                  if (x.score != y.score) return x.score > y.score;
                  return x.endpoints < y.endpoints;
              });

    // Unmatched endpoints ride along with zero score (subgraph closure).
    std::set<std::string> present;
    for (const ScoredKey& e : bundle.entities) present.insert(e.key);
    std::vector<std::string> extra;
    for (const ScoredRelation& r : bundle.relations) {
        if (!present.count(r.endpoints.first)) push_dedup(extra, present, r.endpoints.first);
        if (!present.count(r.endpoints.second)) push_dedup(extra, present, r.endpoints.second);
    }
    std::sort(extra.begin(), extra.end());
    for (const std::string& key : extra) bundle.entities.push_back({key, 0.0});

    // Source chunks of matched entities, scored by accumulated match score.
    std::map<std::string, double> chunk_score;
    for (const auto& [key, score] : entity_score) {
        auto it = graph_.entities.find(key);
        if (it == graph_.entities.end()) continue;
        for (const std::string& chunk_id : it->second.source_chunk_ids)
            chunk_score[chunk_id] += score;
    }
    bundle.chunks = ranked(chunk_score);

    // Attached semantic units via membership, in matched-entity rank order.
    std::set<std::string> seen_sus;
    for (const ScoredKey& e : bundle.entities) {
        if (entity_score.find(e.key) == entity_score.end()) continue;  // skip riders
        for (const auto& [su_id, key] : graph_.memberships) {
            if (key == e.key) push_dedup(bundle.sus, seen_sus, su_id);
        }
    }
    return bundle;
}

RetrievalBundle Retriever::retrieve_high(std::span<const std::string> high_keywords,
                                         const Budgets& budgets, Phase phase) {
    budgets.validate();
    RetrievalBundle bundle;
    if (high_keywords.empty() || index_.size(IndexKind::relation) == 0) return bundle;

    // Relation index keys map back to endpoint pairs via the graph.
    std::map<std::string, std::pair<std::string, std::string>> pair_of;
    for (const auto& [pair, edge] : graph_.relations)
        pair_of[relation_key(pair.first, pair.second)] = pair;

    std::vector<std::string> keywords(high_keywords.begin(), high_keywords.end());
    const auto vectors = provider_.embed(keywords, phase);

    std::map<std::pair<std::string, std::string>, double> relation_score;
    for (const auto& v : vectors) {
        for (const RankedHit& hit : index_.sim_rank(IndexKind::relation, v,
                                                    static_cast<std::size_t>(budgets.top_k_match))) {
            if (hit.score <= 0.0) continue;
            auto it = pair_of.find(hit.key);
            if (it != pair_of.end()) relation_score[it->second] += hit.score;
        }
    }
    for (const auto& [pair, score] : relation_score) bundle.relations.push_back({pair, score});
    std::sort(bundle.relations.begin(), bundle.relations.end(),
              [](const ScoredRelation& x, const ScoredRelation& y) {
                  if (x.score != y.score) return x.score > y.score;
                  return x.endpoints < y.endpoints;
              });
    if (bundle.relations.empty()) return bundle;

    // Endpoint entities, scored by the matched edges they anchor.
    std::map<std::string, double> entity_score;
    for (const auto& [pair, score] : relation_score) {
        entity_score[pair.first] += score;
        entity_score[pair.second] += score;
    }
    bundle.entities = ranked(entity_score);

    // Source chunks from relation provenance, scored by the citing edges.
    std::map<std::string, double> chunk_score;
    for (const auto& [pair, score] : relation_score) {
        const RelationEdge& edge = graph_.relations.at(pair);
        for (const auto& [chunk_id, su_id] : edge.provenance) chunk_score[chunk_id] += score;
    }
    bundle.chunks = ranked(chunk_score);

    // Units cited in matched relation provenance, in relation rank order.
    std::set<std::string> seen_sus;
    for (const ScoredRelation& r : bundle.relations) {
        const RelationEdge& edge = graph_.relations.at(r.endpoints);
        std::set<std::string> cited;
        for (const auto& [chunk_id, su_id] : edge.provenance) {
            if (!su_id.empty()) cited.insert(su_id);
        }
        for (const std::string& su_id : cited) push_dedup(bundle.sus, seen_sus, su_id);
    }
    return bundle;
}

std::vector<std::string> Retriever::complete_sus(std::span<const std::string> sem_phrases,
                                                 std::span<const std::string> sus_low,
                                                 std::span<const std::string> sus_high,
                                                 const Budgets& budgets, Phase phase) {
    budgets.validate();
    std::vector<std::string> result;
    std::set<std::string> seen;
    for (const std::string& su : sus_low) push_dedup(result, seen, su);
    for (const std::string& su : sus_high) push_dedup(result, seen, su);

    const std::size_t target = static_cast<std::size_t>(budgets.su_sufficiency);
    if (result.size() >= target || sem_phrases.empty() || index_.size(IndexKind::su) == 0)
        return result;

    std::vector<std::string> phrases(sem_phrases.begin(), sem_phrases.end());
    const auto vectors = provider_.embed(phrases, phase);
    std::map<std::string, double> su_score;
    for (const auto& v : vectors) {
        for (const RankedHit& hit :
             index_.sim_rank(IndexKind::su, v, static_cast<std::size_t>(budgets.top_k_match))) {
            if (hit.score > 0.0) su_score[hit.key] += hit.score;
        }
    }
    for (const ScoredKey& hit : ranked(su_score)) {
        if (result.size() >= target) break;
        push_dedup(result, seen, hit.key);
    }
    return result;
}

Expansion Retriever::expand_sus(std::span<const std::string> s_all) const {
    Expansion exp;
    std::set<std::string> seen_entities, seen_chunks;
    std::set<std::pair<std::string, std::string>> seen_relations;
    for (const std::string& su_id : s_all) {
        auto it = graph_.su_nodes.find(su_id);
        if (it == graph_.su_nodes.end()) continue;
        for (const std::string& key : it->second.member_entity_keys)
            push_dedup(exp.entities, seen_entities, key);
        for (const auto& [pair, edge] : graph_.relations) {
            const bool cites = std::any_of(
                edge.provenance.begin(), edge.provenance.end(),
                [&](const Provenance& p) { return p.second == su_id; });
            if (cites && seen_relations.insert(pair).second) exp.relations.push_back(pair);
        }
        for (const std::string& chunk_id : it->second.chunk_ids)
            push_dedup(exp.chunks, seen_chunks, chunk_id);
    }
    return exp;
}

FusionInputs Retriever::fuse(const RetrievalBundle& low, const RetrievalBundle& high,
                             std::span<const std::string> sus, const Expansion& expansion,
                             const Budgets& budgets) const {
    budgets.validate();
    FusionInputs fusion;
    fusion.sus.assign(sus.begin(), sus.end());

    // Same item arriving on several paths: counted once, scores summed.
    std::map<std::string, double> entity_score;
    std::map<std::pair<std::string, std::string>, double> relation_score;
    for (const ScoredKey& e : low.entities) entity_score[e.key] += e.score;
    for (const ScoredKey& e : high.entities) entity_score[e.key] += e.score;
    for (const std::string& key : expansion.entities) entity_score.emplace(key, 0.0);
    for (const ScoredRelation& r : low.relations) relation_score[r.endpoints] += r.score;
    for (const ScoredRelation& r : high.relations) relation_score[r.endpoints] += r.score;
    for (const auto& pair : expansion.relations) relation_score.emplace(pair, 0.0);

    std::vector<GraphRow> rows;
    rows.reserve(entity_score.size() + relation_score.size());
    for (const auto& [key, score] : entity_score) {
        GraphRow row;
        row.is_relation = false;
        row.key = key;
        row.score = score;
        row.degree = graph_.entity_degree(key);
        rows.push_back(std::move(row));
    }
    for (const auto& [pair, score] : relation_score) {
        auto it = graph_.relations.find(pair);
        GraphRow row;
        row.is_relation = true;
        row.key = relation_key(pair.first, pair.second);
        row.src = pair.first;
        row.dst = pair.second;
        row.score = score;
        row.degree = it == graph_.relations.end() ? 0 : it->second.weight;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const GraphRow& a, const GraphRow& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.degree != b.degree) return a.degree > b.degree;
        return a.key < b.key;
    });
    if (rows.size() > static_cast<std::size_t>(budgets.graph_budget))
        rows.resize(static_cast<std::size_t>(budgets.graph_budget));

    // Endpoint closure: surviving relation rows pull their endpoints back in
    // even over budget. Those rows are the repairs.
    std::set<std::string> kept_entities;
    for (const GraphRow& row : rows) {
        if (!row.is_relation) kept_entities.insert(row.key);
    }
    std::set<std::string> missing;
    for (const GraphRow& row : rows) {
        if (!row.is_relation) continue;
        if (!kept_entities.count(row.src)) missing.insert(row.src);
        if (!kept_entities.count(row.dst)) missing.insert(row.dst);
    }
    for (const std::string& key : missing) {  // set: ascending, deterministic
        GraphRow row;
        row.is_relation = false;
        row.key = key;
        auto it = entity_score.find(key);
        row.score = it == entity_score.end() ? 0.0 : it->second;
        row.degree = graph_.entity_degree(key);
        rows.push_back(std::move(row));
        ++fusion.endpoint_repairs;
    }
    fusion.graph_rows = std::move(rows);

    // Chunks: dedupe with summed scores before trimming.
    std::map<std::string, double> chunk_score;
    for (const ScoredKey& c : low.chunks) chunk_score[c.key] += c.score;
    for (const ScoredKey& c : high.chunks) chunk_score[c.key] += c.score;
    for (const std::string& chunk_id : expansion.chunks) chunk_score.emplace(chunk_id, 0.0);
    for (const ScoredKey& hit : ranked(chunk_score)) {
        if (fusion.chunks.size() >= static_cast<std::size_t>(budgets.chunk_budget)) break;
        fusion.chunks.push_back(hit.key);
    }
    return fusion;
}

FusionInputs Retriever::retrieve(const std::string& query, const LayerFlags& flags,
                                 const Budgets& budgets, Phase phase) {
    if (!flags.entity_layer && !flags.relation_layer && !flags.su_layer)
        throw NoContextError("all retrieval layers are disabled");

    const KeywordTriple keywords = extract_keywords(query, phase);

    RetrievalBundle low, high;
    if (flags.entity_layer) low = retrieve_low(keywords.low, budgets, phase);
    if (flags.relation_layer) high = retrieve_high(keywords.high, budgets, phase);

    std::vector<std::string> s_all;
    Expansion expansion;
    if (flags.su_layer) {
        s_all = complete_sus(keywords.sem, low.sus, high.sus, budgets, phase);
        expansion = expand_sus(s_all);
    } else {
        std::set<std::string> seen;
        for (const std::string& su : low.sus) push_dedup(s_all, seen, su);
        for (const std::string& su : high.sus) push_dedup(s_all, seen, su);
    }

    FusionInputs fusion = fuse(low, high, s_all, expansion, budgets);
    if (fusion.empty())
        throw NoContextError("retrieval found nothing for this question");
    return fusion;
}

}  // namespace gosu
