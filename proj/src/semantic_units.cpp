#include "gosu/semantic_units.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"

namespace gosu {

using nlohmann::json;

void OptimizerConfig::validate() const {
    if (sim_tau < -1.0 || sim_tau > 1.0) throw ConfigError("sim_tau must be within [-1, 1]");
    if (evidence_budget < 0) throw ConfigError("evidence_budget must be non-negative");
    if (max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
}

// ============================================================================
// Identities
// ============================================================================

namespace {

// Dedup key: whitespace runs collapsed, ends trimmed, ASCII case folded.
std::string fold_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending = true;
            continue;
        }
        if (pending && !out.empty()) out.push_back(' ');
        pending = false;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

std::string unit_text(std::string_view name, std::string_view description) {
    std::string out(name);
    out.push_back('\n');
    out.append(description);
    return out;
}

}  // namespace

std::string candidate_id(std::string_view name, std::string_view description) {
    std::string key = fold_text(name);
    key.push_back('\x1f');
    key += fold_text(description);
    return "c" + sha256_hex(key).substr(0, 12);
}

std::string semantic_unit_id(const std::set<std::string>& merged_from) {
    std::string blob;
    for (const std::string& id : merged_from) {
        blob += id;
        blob.push_back(',');
    }
    return "su" + sha256_hex(blob).substr(0, 12);
}

// ============================================================================
// Request builders
// ============================================================================

CompletionRequest make_su_extract_request(const Chunk& chunk) {
    CompletionRequest req;
    req.task = TaskTag::su_extract;
    req.sections = {{"chunk", chunk.text}};
    return req;
}

CompletionRequest make_su_judge_request(const SemanticUnitCandidate& a,
                                        const SemanticUnitCandidate& b) {
    CompletionRequest req;
    req.task = TaskTag::su_judge;
    req.max_output_tokens = 8;
    req.sections = {{"unit_a", unit_text(a.name, a.description)},
                    {"unit_b", unit_text(b.name, b.description)}};
    return req;
}

CompletionRequest make_su_refine_request(std::span<const SemanticUnitCandidate> members,
                                         std::span<const Chunk> evidence) {
    std::string units;
    for (const SemanticUnitCandidate& m : members) {
        units += "- ";
        units += m.name;
        units += ": ";
        units += m.description;
        units += "\n";
    }
    std::string passages;
    for (const Chunk& c : evidence) {
        passages += "[";
        passages += c.chunk_id;
        passages += "] ";
        passages += c.text;
        passages += "\n";
    }
    CompletionRequest req;
    req.task = TaskTag::su_refine;
    req.sections = {{"units", units}, {"evidence", passages}};
    return req;
}

// ============================================================================
// Pipeline operations
// ============================================================================

namespace {

const RecordSchema& su_record_schema() {
    static const RecordSchema schema{{{"semantic_unit", 3}}};
    return schema;
}

}  // namespace

std::vector<SemanticUnitCandidate> extract_su_candidates(Provider& provider, const Chunk& chunk,
                                                         Phase phase) {
    const auto completion = provider.complete(make_su_extract_request(chunk), phase);
    const ParsedRecords records = parse_records(completion.text, su_record_schema());

    std::vector<SemanticUnitCandidate> out;
    for (const auto& tuple : records.tuples) {
        const std::string& name = tuple[1];
        const std::string& description = tuple[2];
        if (name.empty()) continue;
        SemanticUnitCandidate cand;
        cand.cand_id = candidate_id(name, description);
        cand.name = name;
        cand.description = description;
        cand.source_chunk_ids = {chunk.chunk_id};
        out.push_back(std::move(cand));
    }
    if (out.empty()) return out;

    std::vector<std::string> texts;
    texts.reserve(out.size());
    for (const auto& c : out) texts.push_back(unit_text(c.name, c.description));
    auto vectors = provider.embed(texts, phase);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].embedding = std::move(vectors[i]);
    return out;
}

std::vector<SemanticUnitCandidate> pool_candidates(
    const std::vector<std::vector<SemanticUnitCandidate>>& per_chunk) {
    std::map<std::string, SemanticUnitCandidate> pooled;
    for (const auto& list : per_chunk) {
        for (const SemanticUnitCandidate& cand : list) {
            auto [it, inserted] = pooled.emplace(cand.cand_id, cand);
            if (!inserted) {
                it->second.source_chunk_ids.insert(cand.source_chunk_ids.begin(),
                                                   cand.source_chunk_ids.end());
                if (it->second.embedding.empty()) it->second.embedding = cand.embedding;
            }
        }
    }
    std::vector<SemanticUnitCandidate> out;
    out.reserve(pooled.size());
    for (auto& [id, cand] : pooled) out.push_back(std::move(cand));
    return out;
}

std::vector<std::pair<std::string, std::string>> coarse_pairs(
    std::span<const SemanticUnitCandidate> pool, double sim_tau) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].embedding.empty()) continue;
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
            if (pool[j].embedding.empty()) continue;
            if (cosine(pool[i].embedding, pool[j].embedding) >= sim_tau) {
                auto [a, b] = std::minmax(pool[i].cand_id, pool[j].cand_id);
                pairs.emplace_back(a, b);
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

namespace {

const SemanticUnitCandidate& candidate_by_id(std::span<const SemanticUnitCandidate> pool,
                                             const std::string& id) {
    for (const auto& c : pool) {
        if (c.cand_id == id) return c;
    }
    throw Error("candidate id not in pool: " + id);
}

}  // namespace

FinePairsResult fine_pairs(Provider& provider, std::span<const SemanticUnitCandidate> pool,
                           std::span<const std::pair<std::string, std::string>> pairs,
                           Phase phase) {
    // 0 = NO, 1 = YES, 2 = ambiguous. Slots keep worker output in pair order.
    std::vector<int> outcome(pairs.size(), 0);
    parallel_for(pairs.size(), provider.parallelism(), [&](std::size_t i) {
        const auto& [id_a, id_b] = pairs[i];
        const auto req = make_su_judge_request(candidate_by_id(pool, id_a),
                                               candidate_by_id(pool, id_b));
        const std::string verdict = trim(provider.complete(req, phase).text);
        if (starts_with_icase(verdict, "yes")) {
            outcome[i] = 1;
        } else if (starts_with_icase(verdict, "no")) {
            outcome[i] = 0;
        } else {
            outcome[i] = 2;
        }
    });

    FinePairsResult result;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (outcome[i] == 1) result.confirmed.push_back(pairs[i]);
        if (outcome[i] == 2) ++result.ambiguous;
    }
    return result;
}

std::vector<MergeGroup> cluster_dedup(
    std::span<const SemanticUnitCandidate> pool,
    std::span<const std::pair<std::string, std::string>> confirmed) {
    // Union-find over candidate ids.
    std::map<std::string, std::string> parent;
    for (const auto& c : pool) parent[c.cand_id] = c.cand_id;

    std::function<const std::string&(const std::string&)> find =
        [&](const std::string& x) -> const std::string& {
        std::string cur = x;
        while (parent.at(cur) != cur) {
            parent[cur] = parent.at(parent.at(cur));  // path halving
            cur = parent.at(cur);
        }
        return parent.find(cur)->first;
    };
    auto unite = [&](const std::string& a, const std::string& b) {
        std::string ra = find(a), rb = find(b);
        if (ra == rb) return;
        // Smaller id wins the root so group identity is order-independent.
        if (rb < ra) std::swap(ra, rb);
        parent[rb] = ra;
    };
    for (const auto& [a, b] : confirmed) {
        if (!parent.count(a) || !parent.count(b))
            throw Error("confirmed pair references candidate outside the pool");
        unite(a, b);
    }

    std::map<std::string, MergeGroup> by_root;
    for (const auto& c : pool) by_root[find(c.cand_id)].members.push_back(c.cand_id);
    for (const auto& [a, b] : confirmed) by_root[find(a)].pair_evidence.emplace_back(a, b);

    std::vector<MergeGroup> groups;
    groups.reserve(by_root.size());
    for (auto& [root, group] : by_root) {
        std::sort(group.members.begin(), group.members.end());
        std::sort(group.pair_evidence.begin(), group.pair_evidence.end());
        group.pair_evidence.erase(
            std::unique(group.pair_evidence.begin(), group.pair_evidence.end()),
            group.pair_evidence.end());
        groups.push_back(std::move(group));
    }
    // by_root is keyed by the smallest member id already; keep that order.
    return groups;
}

std::vector<Chunk> gather_evidence(const MergeGroup& group,
                                   std::span<const SemanticUnitCandidate> pool,
                                   int evidence_budget, const CorpusStore& corpus,
                                   const VectorIndex& chunk_index) {
    // ID hits: all member source chunks, ordered by chunk_id. Never evicted.
    std::set<std::string> id_hit_ids;
    std::vector<double> centroid;
    for (const std::string& member : group.members) {
        const SemanticUnitCandidate& cand = candidate_by_id(pool, member);
        id_hit_ids.insert(cand.source_chunk_ids.begin(), cand.source_chunk_ids.end());
        if (!cand.embedding.empty()) {
            if (centroid.empty()) centroid.resize(cand.embedding.size(), 0.0);
            for (std::size_t i = 0; i < cand.embedding.size(); ++i)
                centroid[i] += double(cand.embedding[i]);
        }
    }

    std::vector<Chunk> evidence;
    for (const std::string& id : id_hit_ids) {
        if (const Chunk* c = corpus.find(id)) evidence.push_back(*c);
    }

    const std::size_t budget = evidence_budget < 0 ? 0 : std::size_t(evidence_budget);
    if (evidence.size() >= budget || centroid.empty()) return evidence;

    std::vector<float> query(centroid.size());
    for (std::size_t i = 0; i < centroid.size(); ++i) query[i] = static_cast<float>(centroid[i]);
    l2_normalize(query);

    // Ask for enough rows to survive filtering out the id hits.
    const auto hits = chunk_index.sim_rank(IndexKind::chunk, query, budget + id_hit_ids.size());
    for (const RankedHit& hit : hits) {
        if (evidence.size() >= budget) break;
        if (id_hit_ids.count(hit.key)) continue;
        if (const Chunk* c = corpus.find(hit.key)) evidence.push_back(*c);
    }
    return evidence;
}

SemanticUnit global_refine(Provider& provider, const MergeGroup& group,
                           std::span<const SemanticUnitCandidate> pool,
                           std::span<const Chunk> evidence, Phase phase) {
    if (group.members.empty()) throw Error("cannot refine an empty merge group");

    std::vector<SemanticUnitCandidate> members;
    members.reserve(group.members.size());
    for (const std::string& id : group.members) members.push_back(candidate_by_id(pool, id));

    SemanticUnit unit;
    unit.merged_from.insert(group.members.begin(), group.members.end());
    unit.su_id = semantic_unit_id(unit.merged_from);
    for (const SemanticUnitCandidate& m : members)
        unit.chunk_ids.insert(m.source_chunk_ids.begin(), m.source_chunk_ids.end());

    const auto completion =
        provider.complete(make_su_refine_request(members, evidence), phase);

    bool usable = false;
    if (!trim(completion.text).empty()) {
        const ParsedRecords records = parse_records(completion.text, su_record_schema());
        if (!records.tuples.empty() && !records.tuples[0][1].empty()) {
            unit.name = records.tuples[0][1];
            unit.description = records.tuples[0][2];
            usable = true;
        }
    }
    if (!usable) {
        // members is ordered by cand_id; front() is the lexicographic first.
        unit.name = members.front().name;
        unit.description = members.front().description;
        unit.refine_fallback = true;
    }
    return unit;
}

OptimizeResult optimize_global(Provider& provider, std::vector<SemanticUnitCandidate> pool,
                               const OptimizerConfig& config, const CorpusStore& corpus,
                               const VectorIndex& chunk_index, Phase phase) {
    config.validate();
    OptimizeResult result;

    // origins[current id] = the original candidate ids folded into it.
    std::map<std::string, std::set<std::string>> origins;
    std::map<std::string, bool> fallback_flag;
    for (const auto& c : pool) origins[c.cand_id] = {c.cand_id};

    auto finalize = [&](const std::vector<SemanticUnitCandidate>& final_pool) {
        for (const SemanticUnitCandidate& c : final_pool) {
            SemanticUnit unit;
            unit.merged_from = origins.at(c.cand_id);
            unit.su_id = semantic_unit_id(unit.merged_from);
            unit.name = c.name;
            unit.description = c.description;
            unit.chunk_ids = c.source_chunk_ids;
            unit.embedding = c.embedding;
            auto flag = fallback_flag.find(c.cand_id);
            unit.refine_fallback = flag != fallback_flag.end() && flag->second;
            result.units.push_back(std::move(unit));
        }
        std::sort(result.units.begin(), result.units.end(),
                  [](const SemanticUnit& a, const SemanticUnit& b) { return a.su_id < b.su_id; });
    };

    if (!config.enabled) {
        finalize(pool);
        return result;
    }

    std::vector<SemanticUnitCandidate> current = std::move(pool);
    for (int round = 1; round <= config.max_rounds; ++round) {
        const auto pairs = coarse_pairs(current, config.sim_tau);
        const FinePairsResult fine = fine_pairs(provider, current, pairs, phase);
        const auto groups = cluster_dedup(current, fine.confirmed);

        MergeRoundLog log;
        log.round = round;
        log.units_in = current.size();
        log.coarse_pair_count = pairs.size();
        log.confirmed = fine.confirmed;
        log.ambiguous = fine.ambiguous;
        for (const MergeGroup& g : groups) log.groups.push_back(g.members);
        log.merged_groups = static_cast<std::size_t>(
            std::count_if(groups.begin(), groups.end(),
                          [](const MergeGroup& g) { return g.members.size() >= 2; }));
        result.rounds.push_back(log);

        if (log.merged_groups == 0) break;  // fixpoint: the round produced only singletons

        // Refine multi-member groups in parallel; singletons carry through.
        std::vector<SemanticUnitCandidate> next(groups.size());
        std::mutex origin_mu;
        parallel_for(groups.size(), provider.parallelism(), [&](std::size_t gi) {
            const MergeGroup& group = groups[gi];
            if (group.members.size() == 1) {
                next[gi] = candidate_by_id(current, group.members[0]);
                return;
            }
            const auto evidence =
                gather_evidence(group, current, config.evidence_budget, corpus, chunk_index);
            SemanticUnit refined = global_refine(provider, group, current, evidence, phase);

            SemanticUnitCandidate merged;
            std::set<std::string> merged_origins;
            for (const std::string& member : group.members) {
                const auto& src = origins.at(member);
                merged_origins.insert(src.begin(), src.end());
            }
            merged.cand_id = semantic_unit_id(merged_origins);
            merged.name = refined.name;
            merged.description = refined.description;
            merged.source_chunk_ids = refined.chunk_ids;
            merged.embedding =
                provider.embed({unit_text(merged.name, merged.description)}, phase)[0];
            next[gi] = std::move(merged);

            // gi slots are disjoint, but the shared maps need the lock.
            std::lock_guard<std::mutex> lock(origin_mu);
            origins[next[gi].cand_id] = std::move(merged_origins);
            fallback_flag[next[gi].cand_id] = refined.refine_fallback;
        });

        std::sort(next.begin(), next.end(),
                  [](const SemanticUnitCandidate& a, const SemanticUnitCandidate& b) {
                      return a.cand_id < b.cand_id;
                  });
        current = std::move(next);
    }

    finalize(current);
    return result;
}

// ============================================================================
// Persistence
// ============================================================================

void save_semantic_units_jsonl(const std::filesystem::path& file,
                               std::span<const SemanticUnit> units) {
    std::ostringstream out;
    for (const SemanticUnit& u : units) {
        json row{{"su_id", u.su_id},
                 {"name", u.name},
                 {"description", u.description},
                 {"chunk_ids", u.chunk_ids},
                 {"merged_from", u.merged_from},
                 {"refine_fallback", u.refine_fallback}};
        out << row.dump() << '\n';
    }
    write_text_file(file, out.str());
}

std::vector<SemanticUnit> load_semantic_units_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open semantic unit store: " + file.string());
    std::vector<SemanticUnit> units;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line);
        SemanticUnit u;
        u.su_id = row.at("su_id").get<std::string>();
        u.name = row.at("name").get<std::string>();
        u.description = row.at("description").get<std::string>();
        u.chunk_ids = row.at("chunk_ids").get<std::set<std::string>>();
        u.merged_from = row.at("merged_from").get<std::set<std::string>>();
        u.refine_fallback = row.value("refine_fallback", false);
        units.push_back(std::move(u));
    }
    return units;
}

void save_merge_log_jsonl(const std::filesystem::path& file,
                          std::span<const MergeRoundLog> rounds) {
    std::ostringstream out;
    for (const MergeRoundLog& r : rounds) {
        json row{{"round", r.round},
                 {"units_in", r.units_in},
                 {"coarse_pairs", r.coarse_pair_count},
                 {"confirmed", r.confirmed},
                 {"ambiguous", r.ambiguous},
                 {"groups", r.groups},
                 {"merged_groups", r.merged_groups}};
        out << row.dump() << '\n';
    }
    write_text_file(file, out.str());
}

}  // namespace gosu
