#include "gosu/generation.hpp"

#include <algorithm>
#include <sstream>

#include "gosu/errors.hpp"
#include "gosu/tokenizer.hpp"
#include "gosu/util.hpp"

namespace gosu {

namespace {

constexpr const char* kSectionNames[] = {"semantic_units", "relations", "entities", "chunks"};

std::string joined_ids(const std::set<std::string>& ids) {
    std::string out;
    for (const std::string& id : ids) {
        if (!out.empty()) out.push_back(';');
        out += id;
    }
    return out;
}

std::string section_render(const ContextSection& s) {
    std::string out = "[" + s.name + "]\n" + s.column_header + "\n";
    for (const std::string& row : s.rows) {
        out += row;
        out.push_back('\n');
    }
    return out;
}

}  // namespace

std::string ContextDocument::render() const {
    std::vector<std::string> blocks;
    for (const ContextSection& s : sections) {
        if (!s.rows.empty()) blocks.push_back(section_render(s));
    }
    return join(blocks, "\n");
}

std::size_t ContextDocument::token_count() const { return count_tokens(render()); }

std::map<std::string, std::size_t> ContextDocument::stats() const {
    std::map<std::string, std::size_t> out;
    for (const ContextSection& s : sections) out[s.name + "_rows"] = s.rows.size();
    out["context_tokens"] = token_count();
    return out;
}

bool ContextDocument::empty() const noexcept {
    return std::all_of(sections.begin(), sections.end(),
                       [](const ContextSection& s) { return s.rows.empty(); });
}

ContextDocument build_context(const FusionInputs& fusion, const KnowledgeGraph& graph,
                              const CorpusStore& corpus, int token_budget) {
    if (token_budget < 0) throw ConfigError("context token budget must be non-negative");

    ContextDocument doc;
    doc.sections.resize(4);
    ContextSection& sus = doc.sections[0];
    ContextSection& relations = doc.sections[1];
    ContextSection& entities = doc.sections[2];
    ContextSection& chunks = doc.sections[3];

    sus.name = kSectionNames[0];
    sus.column_header = "su_id\tname\tdescription\tchunks";
    for (const std::string& su_id : fusion.sus) {
        auto it = graph.su_nodes.find(su_id);
        if (it == graph.su_nodes.end()) continue;
        const SUNode& n = it->second;
        sus.rows.push_back(n.su_id + "\t" + one_line(n.name) + "\t" + one_line(n.description) +
                           "\t" + joined_ids(n.chunk_ids));
    }

    relations.name = kSectionNames[1];
    relations.column_header = "src\tdst\tdescription\tkeywords\tweight\tchunks";
    entities.name = kSectionNames[2];
    entities.column_header = "key\ttype\tdescription\tchunks";
    for (const GraphRow& row : fusion.graph_rows) {
        if (row.is_relation) {
            auto it = graph.relations.find({row.src, row.dst});
            if (it == graph.relations.end()) continue;
            const RelationEdge& r = it->second;
            std::set<std::string> prov_chunks;
            for (const auto& [chunk_id, su_id] : r.provenance) prov_chunks.insert(chunk_id);
            relations.rows.push_back(r.src + "\t" + r.dst + "\t" +
                                     one_line(join(r.descriptions, " | ")) + "\t" +
                                     join(r.keywords, ";") + "\t" + std::to_string(r.weight) +
                                     "\t" + joined_ids(prov_chunks));
        } else {
            auto it = graph.entities.find(row.key);
            if (it == graph.entities.end()) continue;
            const EntityNode& e = it->second;
            entities.rows.push_back(e.entity_key + "\t" + one_line(e.entity_type) + "\t" +
                                    one_line(join(e.descriptions, " | ")) + "\t" +
                                    joined_ids(e.source_chunk_ids));
        }
    }

    chunks.name = kSectionNames[3];
    chunks.column_header = "chunk_id\ttext";
    for (const std::string& chunk_id : fusion.chunks) {
        if (const Chunk* c = corpus.find(chunk_id))
            chunks.rows.push_back(c->chunk_id + "\t" + one_line(c->text));
    }

    // Trim: drop rows from the back, lowest-priority section first, until the
    // rendered document fits. Dropping a section's last row removes its
    // banner and header tokens too, so the loop always terminates at <= budget.
    const std::size_t budget = static_cast<std::size_t>(token_budget);
    // Priority order for dropping: chunks, entities, relations, semantic_units.
    ContextSection* drop_order[] = {&chunks, &entities, &relations, &sus};
    while (doc.token_count() > budget) {
        ContextSection** victim =
            std::find_if(std::begin(drop_order), std::end(drop_order),
                         [](ContextSection* s) { return !s->rows.empty(); });
        if (victim == std::end(drop_order)) break;  // nothing left to drop
        (*victim)->rows.pop_back();
    }
    return doc;
}

CompletionRequest make_answer_request(const std::string& query, const ContextDocument& context) {
    CompletionRequest req;
    req.task = TaskTag::answer_gen;
    req.sections = {{"query", query}, {"context", context.render()}};
    return req;
}

AnswerResult generate_answer(Provider& provider, const std::string& query,
                             const ContextDocument& context, Phase phase) {
    if (context.empty())
        throw NoContextError("cannot answer with an empty context document");

    AnswerResult result;
    result.context_stats = context.stats();
    try {
        auto completion = provider.complete(make_answer_request(query, context), phase);
        result.text = std::move(completion.text);
        result.usage = completion.delta;
    } catch (const Error& e) {
        std::ostringstream stats;
        for (const auto& [key, value] : result.context_stats)
            stats << ' ' << key << '=' << value;
        throw StageError("answer_gen", std::string(e.what()) + " | context:" + stats.str());
    }
    return result;
}

}  // namespace gosu
