#include "gosu/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gosu/errors.hpp"
#include "gosu/tokenizer.hpp"
#include "gosu/util.hpp"

namespace gosu {

using nlohmann::json;

void ChunkingConfig::validate() const {
    if (window_tokens <= 0) throw ConfigError("window_tokens must be positive");
    if (overlap_tokens < 0) throw ConfigError("overlap_tokens must be non-negative");
    if (overlap_tokens >= window_tokens)
        throw ConfigError("overlap_tokens must be smaller than window_tokens");
}

std::string normalize_text(std::string_view raw) {
    // Pass 1: line endings. CR/LF and lone CR both become LF.
    std::string unified;
    unified.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\r') {
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
            unified.push_back('\n');
        } else {
            unified.push_back(c);
        }
    }

    // Pass 2: per line, collapse horizontal whitespace and trim the ends.
    auto is_horizontal_ws = [](char c) { return c == ' ' || c == '\t' || c == '\v' || c == '\f'; };
    std::string out;
    out.reserve(unified.size());
    std::size_t line_start = out.size();
    bool pending_space = false;
    auto end_line = [&] {
        // Drop a trailing space left by a whitespace run at end of line.
        if (out.size() > line_start && out.back() == ' ') out.pop_back();
    };
    for (char c : unified) {
        if (c == '\n') {
            end_line();
            out.push_back('\n');
            line_start = out.size();
            pending_space = false;
        } else if (is_horizontal_ws(c)) {
            pending_space = true;
        } else {
            if (pending_space && out.size() > line_start) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    end_line();
    return out;
}

std::string make_chunk_id(const std::string& doc_id, int ordinal) {
    return doc_id + "#" + zero_pad(ordinal, 5);
}

std::vector<Chunk> doc_split(const Document& doc, const ChunkingConfig& cfg) {
    cfg.validate();
    const std::string norm = normalize_text(doc.text);
    const std::vector<TokenSpan> spans = tokenize_spans(norm);
    if (spans.empty()) throw EmptyDocumentError(doc.doc_id);

    const std::size_t total = spans.size();
    const std::size_t window = static_cast<std::size_t>(cfg.window_tokens);
    const std::size_t stride = window - static_cast<std::size_t>(cfg.overlap_tokens);

    std::vector<Chunk> chunks;
    std::size_t start = 0;
    int ordinal = 0;
    while (true) {
        const std::size_t end = std::min(start + window, total);
        Chunk c;
        c.chunk_id = make_chunk_id(doc.doc_id, ordinal);
        c.doc_id = doc.doc_id;
        c.ordinal = ordinal;
        c.token_start = start;
        c.token_end = end;
        const std::size_t byte_begin = spans[start].begin;
        const std::size_t byte_end = spans[end - 1].end;
        c.text = norm.substr(byte_begin, byte_end - byte_begin);
        chunks.push_back(std::move(c));
        if (end >= total) break;
        start += stride;
        ++ordinal;
    }
    return chunks;
}

std::vector<Document> load_corpus_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("corpus directory does not exist: " + dir.string());
    std::vector<Document> docs;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        Document d;
        d.doc_id = fs::relative(entry.path(), dir).generic_string();
        d.text = read_text_file(entry.path());
        d.source_uri = entry.path().string();
        docs.push_back(std::move(d));
    }
    std::sort(docs.begin(), docs.end(),
              [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
    return docs;
}

std::vector<Document> load_corpus_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open corpus file: " + file.string());
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error("bad JSONL at " + file.string() + ":" + std::to_string(lineno) + ": " +
                        e.what());
        }
        if (!row.contains("doc_id") || !row.contains("text"))
            throw Error("corpus row missing doc_id/text at " + file.string() + ":" +
                        std::to_string(lineno));
        Document d;
        d.doc_id = row.at("doc_id").get<std::string>();
        d.text = row.at("text").get<std::string>();
        d.source_uri = file.string() + ":" + std::to_string(lineno);
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return load_corpus_dir(path);
    if (std::filesystem::is_regular_file(path)) return load_corpus_jsonl(path);
    throw Error("corpus path does not exist: " + path.string());
}

std::string corpus_hash(const std::vector<Document>& docs) {
    std::vector<const Document*> sorted;
    sorted.reserve(docs.size());
    for (const auto& d : docs) sorted.push_back(&d);
    std::sort(sorted.begin(), sorted.end(),
              [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });
    std::string blob;
    for (const Document* d : sorted) {
        blob += d->doc_id;
        blob.push_back('\x1f');
        blob += d->text;
        blob.push_back('\x1e');
    }
    return sha256_hex(blob);
}

void CorpusStore::add(Chunk chunk) {
    auto [it, inserted] = by_id_.emplace(chunk.chunk_id, chunks_.size());
    if (!inserted) {
        chunks_[it->second] = std::move(chunk);
        return;
    }
    chunks_.push_back(std::move(chunk));
}

const Chunk* CorpusStore::find(const std::string& chunk_id) const noexcept {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

void CorpusStore::save_jsonl(const std::filesystem::path& file) const {
    std::ostringstream out;
    for (const Chunk& c : chunks_) {
        json row{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id},           {"ordinal", c.ordinal},
                 {"text", c.text},         {"token_start", c.token_start}, {"token_end", c.token_end}};
        out << row.dump() << '\n';
    }
    write_text_file(file, out.str());
}

CorpusStore CorpusStore::load_jsonl(const std::filesystem::path& file) {
    CorpusStore store;
    std::ifstream in(file);
    if (!in) throw Error("cannot open chunk store: " + file.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line);
        Chunk c;
        c.chunk_id = row.at("chunk_id").get<std::string>();
        c.doc_id = row.at("doc_id").get<std::string>();
        c.ordinal = row.at("ordinal").get<int>();
        c.text = row.at("text").get<std::string>();
        c.token_start = row.at("token_start").get<std::size_t>();
        c.token_end = row.at("token_end").get<std::size_t>();
        store.add(std::move(c));
    }
    return store;
}

}  // namespace gosu
