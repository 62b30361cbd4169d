#include "gosu/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"

namespace gosu {

using nlohmann::json;

// ============================================================================
// Keys
// ============================================================================

std::string relation_key(const std::string& src, const std::string& dst) {
    return src + " | " + dst;
}

std::string normalize_entity_key(std::string_view raw) {
    // Collapse whitespace runs, trim.
    std::string collapsed;
    collapsed.reserve(raw.size());
    bool pending = false;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending = true;
            continue;
        }
        if (pending && !collapsed.empty()) collapsed.push_back(' ');
        pending = false;
        collapsed.push_back(c);
    }
    // Strip outer punctuation (quotes, brackets, trailing periods, ...).
    std::size_t b = 0, e = collapsed.size();
    auto is_outer_punct = [](unsigned char c) {
        return std::ispunct(c) != 0;
    };
    while (b < e && is_outer_punct(static_cast<unsigned char>(collapsed[b]))) ++b;
    while (e > b && is_outer_punct(static_cast<unsigned char>(collapsed[e - 1]))) --e;
    while (b < e && collapsed[b] == ' ') ++b;
    while (e > b && collapsed[e - 1] == ' ') --e;
    return to_upper_ascii(std::string_view(collapsed).substr(b, e - b));
}

long KnowledgeGraph::entity_degree(const std::string& entity_key) const {
    long degree = 0;
    for (const auto& [pair, edge] : relations) {
        if (pair.first == entity_key || pair.second == entity_key) ++degree;
    }
    for (const auto& [su_id, key] : memberships) {
        if (key == entity_key) ++degree;
    }
    return degree;
}

std::vector<std::pair<std::string, std::string>> KnowledgeGraph::incident_relations(
    const std::string& entity_key) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [pair, edge] : relations) {
        if (pair.first == entity_key || pair.second == entity_key) out.push_back(pair);
    }
    return out;
}

// ============================================================================
// Request builders
// ============================================================================

CompletionRequest make_pre_kg_request(const Chunk& chunk) {
    CompletionRequest req;
    req.task = TaskTag::pre_kg_extract;
    req.sections = {{"chunk", chunk.text}};
    return req;
}

CompletionRequest make_su_entrel_request(const SemanticUnit& unit, const Chunk& chunk) {
    CompletionRequest req;
    req.task = TaskTag::su_entrel_extract;
    req.sections = {{"semantic_unit", unit.name + "\n" + unit.description},
                    {"chunk", chunk.text}};
    return req;
}

// ============================================================================
// Merging primitives
// ============================================================================

namespace {

void append_distinct(std::vector<std::string>& list, const std::string& value) {
    if (value.empty()) return;
    if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

void merge_entity(EntityNode& into, const EntityNode& from) {
    if (into.display_name.empty()) into.display_name = from.display_name;
    if (into.entity_type.empty()) into.entity_type = from.entity_type;
    for (const std::string& d : from.descriptions) append_distinct(into.descriptions, d);
    into.source_chunk_ids.insert(from.source_chunk_ids.begin(), from.source_chunk_ids.end());
    into.su_ids.insert(from.su_ids.begin(), from.su_ids.end());
    if (into.embedding.empty()) into.embedding = from.embedding;
}

void merge_relation(RelationEdge& into, const RelationEdge& from) {
    for (const std::string& d : from.descriptions) append_distinct(into.descriptions, d);
    for (const std::string& k : from.keywords) append_distinct(into.keywords, k);
    into.provenance.insert(from.provenance.begin(), from.provenance.end());
    if (into.embedding.empty()) into.embedding = from.embedding;
}

void fold_entity(ExtractionSet& set, std::map<std::string, std::size_t>& entity_at,
                 EntityNode entity) {
    auto [it, inserted] = entity_at.emplace(entity.entity_key, set.entities.size());
    if (inserted) {
        set.entities.push_back(std::move(entity));
    } else {
        merge_entity(set.entities[it->second], entity);
    }
}

void fold_relation(ExtractionSet& set,
                   std::map<std::pair<std::string, std::string>, std::size_t>& relation_at,
                   RelationEdge edge) {
    auto key = std::make_pair(edge.src, edge.dst);
    auto [it, inserted] = relation_at.emplace(key, set.relations.size());
    if (inserted) {
        set.relations.push_back(std::move(edge));
    } else {
        merge_relation(set.relations[it->second], edge);
    }
}

const RecordSchema& graph_record_schema() {
    static const RecordSchema schema{{{"entity", 4}, {"relation", 5}}};
    return schema;
}

// Shared parse for both extraction flavors: entity/relation records into an
// ExtractionSet with the given provenance, stubs for dangling endpoints.
void parse_into(ExtractionSet& set, std::map<std::string, std::size_t>& entity_at,
                std::map<std::pair<std::string, std::string>, std::size_t>& relation_at,
                const ParsedRecords& records, const std::string& chunk_id,
                const std::string& su_id) {
    const std::set<std::string> su_set =
        su_id.empty() ? std::set<std::string>{} : std::set<std::string>{su_id};

    for (const auto& tuple : records.tuples) {
        if (tuple[0] == "entity") {
            const std::string key = normalize_entity_key(tuple[1]);
            if (key.empty()) continue;
            EntityNode e;
            e.entity_key = key;
            e.display_name = trim(tuple[1]);
            e.entity_type = trim(tuple[2]);
            if (!trim(tuple[3]).empty()) e.descriptions.push_back(trim(tuple[3]));
            e.source_chunk_ids = {chunk_id};
            e.su_ids = su_set;
            fold_entity(set, entity_at, std::move(e));
        }
    }
    for (const auto& tuple : records.tuples) {
        if (tuple[0] != "relation") continue;
        const std::string src = normalize_entity_key(tuple[1]);
        const std::string dst = normalize_entity_key(tuple[2]);
        if (src.empty() || dst.empty() || src == dst) continue;  // self-loops dropped

        // Endpoints must exist; repair with stubs when the model named an
        // entity only inside a relation.
        for (const auto& [key, display] :
             {std::make_pair(src, trim(tuple[1])), std::make_pair(dst, trim(tuple[2]))}) {
            if (!entity_at.count(key)) {
                EntityNode stub;
                stub.entity_key = key;
                stub.display_name = display;
                stub.source_chunk_ids = {chunk_id};
                stub.su_ids = su_set;
                fold_entity(set, entity_at, std::move(stub));
            }
        }

        RelationEdge edge;
        edge.src = std::min(src, dst);
        edge.dst = std::max(src, dst);
        if (!trim(tuple[3]).empty()) edge.descriptions.push_back(trim(tuple[3]));
        for (const std::string& kw : split(tuple[4], ",")) {
            const std::string cleaned = trim(kw);
            if (!cleaned.empty()) append_distinct(edge.keywords, cleaned);
        }
        edge.provenance = {{chunk_id, su_id}};
        fold_relation(set, relation_at, std::move(edge));
    }
}

}  // namespace

// ============================================================================
// Extraction
// ============================================================================

ExtractionSet extract_pre_kg(Provider& provider, const Chunk& chunk, Phase phase) {
    const auto completion = provider.complete(make_pre_kg_request(chunk), phase);
    const ParsedRecords records = parse_records(completion.text, graph_record_schema());

    ExtractionSet set;
    std::map<std::string, std::size_t> entity_at;
    std::map<std::pair<std::string, std::string>, std::size_t> relation_at;
    parse_into(set, entity_at, relation_at, records, chunk.chunk_id, "");
    return set;
}

ExtractionSet extract_su_entities_relations(Provider& provider, const SemanticUnit& unit,
                                            const CorpusStore& corpus, Phase phase) {
    ExtractionSet set;
    std::map<std::string, std::size_t> entity_at;
    std::map<std::pair<std::string, std::string>, std::size_t> relation_at;
    std::vector<FixtureMissingError::Miss> misses;
    for (const std::string& chunk_id : unit.chunk_ids) {  // std::set: ascending
        const Chunk* chunk = corpus.find(chunk_id);
        if (!chunk) throw Error("semantic unit cites unknown chunk: " + chunk_id);
        try {
            const auto completion = provider.complete(make_su_entrel_request(unit, *chunk), phase);
            const ParsedRecords records = parse_records(completion.text, graph_record_schema());
            parse_into(set, entity_at, relation_at, records, chunk_id, unit.su_id);
        } catch (const FixtureMissingError& ex) {
            // Keep walking the unit's chunks so one pass reports every gap.
            misses.insert(misses.end(), ex.misses().begin(), ex.misses().end());
        }
    }
    if (!misses.empty()) throw FixtureMissingError(std::move(misses));
    return set;
}

Subgraph build_subgraph(const SemanticUnit& unit, ExtractionSet extraction) {
    Subgraph sg;
    sg.su_node.su_id = unit.su_id;
    sg.su_node.name = unit.name;
    sg.su_node.description = unit.description;
    sg.su_node.chunk_ids = unit.chunk_ids;
    sg.su_node.embedding = unit.embedding;
    for (const EntityNode& e : extraction.entities)
        sg.su_node.member_entity_keys.insert(e.entity_key);
    sg.su_node.empty_extraction = sg.su_node.member_entity_keys.empty();
    sg.parts = std::move(extraction);
    return sg;
}

// ============================================================================
// Assembly
// ============================================================================

KnowledgeGraph assemble(std::span<const ExtractionSet> pre_kg,
                        std::span<const Subgraph> subgraphs) {
    KnowledgeGraph g;

    auto fold_set = [&g](const ExtractionSet& set) {
        for (const EntityNode& e : set.entities) {
            auto [it, inserted] = g.entities.emplace(e.entity_key, e);
            if (!inserted) merge_entity(it->second, e);
        }
        for (const RelationEdge& r : set.relations) {
            auto [it, inserted] = g.relations.emplace(std::make_pair(r.src, r.dst), r);
            if (!inserted) merge_relation(it->second, r);
        }
    };

    for (const ExtractionSet& set : pre_kg) fold_set(set);
    for (const Subgraph& sg : subgraphs) {
        fold_set(sg.parts);
        auto [it, inserted] = g.su_nodes.emplace(sg.su_node.su_id, sg.su_node);
        if (!inserted) {
            // Same unit assembled twice: unify member sets and provenance.
            it->second.member_entity_keys.insert(sg.su_node.member_entity_keys.begin(),
                                                 sg.su_node.member_entity_keys.end());
            it->second.chunk_ids.insert(sg.su_node.chunk_ids.begin(), sg.su_node.chunk_ids.end());
            it->second.empty_extraction =
                it->second.empty_extraction && sg.su_node.empty_extraction;
            if (it->second.embedding.empty()) it->second.embedding = sg.su_node.embedding;
        }
        for (const std::string& key : sg.su_node.member_entity_keys)
            g.memberships.emplace(sg.su_node.su_id, key);
    }

    // Structural repairs: anything referenced must exist.
    auto ensure_entity = [&g](const std::string& key) {
        if (!g.entities.count(key)) {
            EntityNode stub;
            stub.entity_key = key;
            stub.display_name = key;
            g.entities.emplace(key, std::move(stub));
        }
    };
    for (const auto& [pair, edge] : g.relations) {
        ensure_entity(pair.first);
        ensure_entity(pair.second);
    }
    for (const auto& [su_id, key] : g.memberships) ensure_entity(key);

    // Weight law: always recomputed from provenance, never summed.
    for (auto& [pair, edge] : g.relations)
        edge.weight = static_cast<long>(edge.provenance.size());

    return g;
}

std::pair<std::vector<ExtractionSet>, std::vector<Subgraph>> graph_as_inputs(
    const KnowledgeGraph& graph) {
    ExtractionSet everything;
    for (const auto& [key, e] : graph.entities) everything.entities.push_back(e);
    for (const auto& [pair, r] : graph.relations) everything.relations.push_back(r);

    std::vector<Subgraph> subgraphs;
    for (const auto& [su_id, node] : graph.su_nodes) {
        Subgraph sg;
        sg.su_node = node;
        for (const std::string& key : node.member_entity_keys) {
            auto it = graph.entities.find(key);
            if (it != graph.entities.end()) sg.parts.entities.push_back(it->second);
        }
        for (const auto& [pair, r] : graph.relations) {
            const bool cites = std::any_of(
                r.provenance.begin(), r.provenance.end(),
                [&](const Provenance& p) { return p.second == su_id; });
            if (cites) sg.parts.relations.push_back(r);
        }
        subgraphs.push_back(std::move(sg));
    }
    return {std::vector<ExtractionSet>{std::move(everything)}, std::move(subgraphs)};
}

void validate_graph(const KnowledgeGraph& graph) {
    for (const auto& [pair, edge] : graph.relations) {
        if (pair.first != edge.src || pair.second != edge.dst)
            throw Error("relation stored under wrong key: " + relation_key(edge.src, edge.dst));
        if (edge.src >= edge.dst)
            throw Error("relation endpoints not ordered: " + relation_key(edge.src, edge.dst));
        if (!graph.entities.count(edge.src) || !graph.entities.count(edge.dst))
            throw Error("dangling relation endpoint: " + relation_key(edge.src, edge.dst));
        if (edge.weight != static_cast<long>(edge.provenance.size()))
            throw Error("relation weight out of sync with provenance: " +
                        relation_key(edge.src, edge.dst));
        if (edge.provenance.empty())
            throw Error("relation with empty provenance: " + relation_key(edge.src, edge.dst));
    }
    for (const auto& [su_id, key] : graph.memberships) {
        if (!graph.su_nodes.count(su_id)) throw Error("membership cites unknown unit: " + su_id);
        if (!graph.entities.count(key)) throw Error("membership cites unknown entity: " + key);
    }
    for (const auto& [su_id, node] : graph.su_nodes) {
        if (node.member_entity_keys.empty() && !node.empty_extraction)
            throw Error("unit with no members must be flagged: " + su_id);
        for (const std::string& key : node.member_entity_keys) {
            if (!graph.memberships.count({su_id, key}))
                throw Error("member without membership edge: " + su_id + " -> " + key);
        }
    }
}

// ============================================================================
// Persistence
// ============================================================================

void save_graph(const std::filesystem::path& dir, const KnowledgeGraph& graph) {
    std::ostringstream entities, relations, su_nodes, memberships;
    for (const auto& [key, e] : graph.entities) {
        json row{{"key", e.entity_key},        {"name", e.display_name},
                 {"type", e.entity_type},      {"descriptions", e.descriptions},
                 {"chunks", e.source_chunk_ids}, {"sus", e.su_ids}};
        entities << row.dump() << '\n';
    }
    for (const auto& [pair, r] : graph.relations) {
        json prov = json::array();
        for (const auto& [chunk_id, su_id] : r.provenance) prov.push_back({chunk_id, su_id});
        json row{{"src", r.src},           {"dst", r.dst},
                 {"descriptions", r.descriptions}, {"keywords", r.keywords},
                 {"weight", r.weight},     {"provenance", std::move(prov)}};
        relations << row.dump() << '\n';
    }
    for (const auto& [su_id, n] : graph.su_nodes) {
        json row{{"su_id", n.su_id},
                 {"name", n.name},
                 {"description", n.description},
                 {"chunk_ids", n.chunk_ids},
                 {"members", n.member_entity_keys},
                 {"empty_extraction", n.empty_extraction}};
        su_nodes << row.dump() << '\n';
    }
    for (const auto& [su_id, key] : graph.memberships) {
        json row{{"su_id", su_id}, {"entity_key", key}};
        memberships << row.dump() << '\n';
    }
    write_text_file(dir / "entities.jsonl", entities.str());
    write_text_file(dir / "relations.jsonl", relations.str());
    write_text_file(dir / "su_nodes.jsonl", su_nodes.str());
    write_text_file(dir / "memberships.jsonl", memberships.str());
}

namespace {

void for_each_jsonl(const std::filesystem::path& file, const std::function<void(json)>& fn) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open graph file: " + file.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        fn(json::parse(line));
    }
}

}  // namespace

KnowledgeGraph load_graph(const std::filesystem::path& dir) {
    KnowledgeGraph g;
    for_each_jsonl(dir / "entities.jsonl", [&](json row) {
        EntityNode e;
        e.entity_key = row.at("key").get<std::string>();
        e.display_name = row.at("name").get<std::string>();
        e.entity_type = row.at("type").get<std::string>();
        e.descriptions = row.at("descriptions").get<std::vector<std::string>>();
        e.source_chunk_ids = row.at("chunks").get<std::set<std::string>>();
        e.su_ids = row.at("sus").get<std::set<std::string>>();
        g.entities.emplace(e.entity_key, std::move(e));
    });
    for_each_jsonl(dir / "relations.jsonl", [&](json row) {
        RelationEdge r;
        r.src = row.at("src").get<std::string>();
        r.dst = row.at("dst").get<std::string>();
        r.descriptions = row.at("descriptions").get<std::vector<std::string>>();
        r.keywords = row.at("keywords").get<std::vector<std::string>>();
        r.weight = row.at("weight").get<long>();
        for (const json& p : row.at("provenance"))
            r.provenance.emplace(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        g.relations.emplace(std::make_pair(r.src, r.dst), std::move(r));
    });
    for_each_jsonl(dir / "su_nodes.jsonl", [&](json row) {
        SUNode n;
        n.su_id = row.at("su_id").get<std::string>();
        n.name = row.at("name").get<std::string>();
        n.description = row.at("description").get<std::string>();
        n.chunk_ids = row.at("chunk_ids").get<std::set<std::string>>();
        n.member_entity_keys = row.at("members").get<std::set<std::string>>();
        n.empty_extraction = row.value("empty_extraction", false);
        g.su_nodes.emplace(n.su_id, std::move(n));
    });
    for_each_jsonl(dir / "memberships.jsonl", [&](json row) {
        g.memberships.emplace(row.at("su_id").get<std::string>(),
                              row.at("entity_key").get<std::string>());
    });
    return g;
}

// ============================================================================
// GraphML
// ============================================================================

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string to_graphml(const KnowledgeGraph& graph) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
        << "  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n"
        << "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n"
        << "  <key id=\"type\" for=\"node\" attr.name=\"type\" attr.type=\"string\"/>\n"
        << "  <key id=\"description\" for=\"node\" attr.name=\"description\" attr.type=\"string\"/>\n"
        << "  <key id=\"ekind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n"
        << "  <key id=\"edescription\" for=\"edge\" attr.name=\"description\" attr.type=\"string\"/>\n"
        << "  <key id=\"keywords\" for=\"edge\" attr.name=\"keywords\" attr.type=\"string\"/>\n"
        << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n"
        << "  <graph id=\"G\" edgedefault=\"undirected\">\n";

    for (const auto& [key, e] : graph.entities) {
        out << "    <node id=\"" << xml_escape(key) << "\">\n"
            << "      <data key=\"kind\">entity</data>\n"
            << "      <data key=\"label\">" << xml_escape(e.display_name) << "</data>\n"
            << "      <data key=\"type\">" << xml_escape(e.entity_type) << "</data>\n"
            << "      <data key=\"description\">"
            << xml_escape(join(e.descriptions, " | ")) << "</data>\n"
            << "    </node>\n";
    }
    for (const auto& [su_id, n] : graph.su_nodes) {
        out << "    <node id=\"" << xml_escape(su_id) << "\">\n"
            << "      <data key=\"kind\">semantic_unit</data>\n"
            << "      <data key=\"label\">" << xml_escape(n.name) << "</data>\n"
            << "      <data key=\"description\">" << xml_escape(n.description) << "</data>\n"
            << "    </node>\n";
    }
    std::size_t edge_id = 0;
    for (const auto& [pair, r] : graph.relations) {
        out << "    <edge id=\"e" << edge_id++ << "\" source=\"" << xml_escape(r.src)
            << "\" target=\"" << xml_escape(r.dst) << "\">\n"
            << "      <data key=\"ekind\">relation</data>\n"
            << "      <data key=\"edescription\">"
            << xml_escape(join(r.descriptions, " | ")) << "</data>\n"
            << "      <data key=\"keywords\">" << xml_escape(join(r.keywords, "; ")) << "</data>\n"
            << "      <data key=\"weight\">" << r.weight << "</data>\n"
            << "    </edge>\n";
    }
    for (const auto& [su_id, key] : graph.memberships) {
        out << "    <edge id=\"e" << edge_id++ << "\" source=\"" << xml_escape(su_id)
            << "\" target=\"" << xml_escape(key) << "\">\n"
            << "      <data key=\"ekind\">membership</data>\n"
            << "    </edge>\n";
    }
    out << "  </graph>\n</graphml>\n";
    return out.str();
}

}  // namespace gosu
