#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gosu {

struct Document {
    std::string doc_id;
    std::string text;
    std::string source_uri;  // where the text came from; informational only
};

// One sliding-window slice of a document. Token positions refer to the
// normalized document's token stream; text is the matching byte slice.
struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    int ordinal = 0;
    std::string text;
    std::size_t token_start = 0;
    std::size_t token_end = 0;  // exclusive
};

struct ChunkingConfig {
    int window_tokens = 1200;
    int overlap_tokens = 100;

    // Throws ConfigError unless 0 <= overlap < window.
    void validate() const;
};

// Canonicalizes raw text: CR and CR/LF become LF, runs of horizontal
// whitespace collapse to one space, every line loses leading/trailing
// whitespace. Total — never throws. Input is assumed to be composed UTF-8;
// bytes are otherwise passed through untouched.
std::string normalize_text(std::string_view raw);

// chunk_id is a pure function of (doc_id, ordinal): "<doc_id>#<5-digit ordinal>".
std::string make_chunk_id(const std::string& doc_id, int ordinal);

// Normalizes, tokenizes, and slices the document into overlapping windows.
// Consecutive windows start overlap_tokens before the previous window ends;
// the final window is clamped at the document end. Throws EmptyDocumentError
// when the normalized text has zero tokens.
std::vector<Chunk> doc_split(const Document& doc, const ChunkingConfig& cfg);

// Directory ingestion: every regular file below `dir` is one document, with
// doc_id = path relative to dir (generic '/' separators), sorted by doc_id.
std::vector<Document> load_corpus_dir(const std::filesystem::path& dir);

// JSONL ingestion: one {"doc_id": ..., "text": ...} object per line.
std::vector<Document> load_corpus_jsonl(const std::filesystem::path& file);

// Dispatch on path type: directory -> load_corpus_dir, file -> load_corpus_jsonl.
std::vector<Document> load_corpus(const std::filesystem::path& path);

// Stable content hash over (doc_id, text) pairs sorted by doc_id.
std::string corpus_hash(const std::vector<Document>& docs);

// In-memory chunk store with id lookup; also handles (de)serialization of
// the persisted chunks.jsonl file.
class CorpusStore {
public:
    void add(Chunk chunk);
    const Chunk* find(const std::string& chunk_id) const noexcept;
    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    std::size_t size() const noexcept { return chunks_.size(); }

    void save_jsonl(const std::filesystem::path& file) const;
    static CorpusStore load_jsonl(const std::filesystem::path& file);

private:
    std::vector<Chunk> chunks_;
    std::map<std::string, std::size_t> by_id_;
};

}  // namespace gosu
