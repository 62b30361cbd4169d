#include "gosu/provider.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gosu/errors.hpp"
#include "gosu/tokenizer.hpp"
#include "gosu/util.hpp"

namespace gosu {

using nlohmann::json;

// ============================================================================
// Task tags
// ============================================================================

namespace {

constexpr const char* kTaskNames[] = {
    "su_extract",     "su_judge",        "su_refine",  "pre_kg_extract",
    "su_entrel_extract", "keyword_extract", "answer_gen", "judge_pair",
};

}  // namespace

const char* to_string(TaskTag tag) noexcept { return kTaskNames[static_cast<int>(tag)]; }

std::optional<TaskTag> task_tag_from_string(std::string_view name) noexcept {
    for (int i = 0; i < 8; ++i) {
        if (name == kTaskNames[i]) return static_cast<TaskTag>(i);
    }
    return std::nullopt;
}

const char* to_string(Phase phase) noexcept { return phase == Phase::build ? "build" : "query"; }

// ============================================================================
// Fingerprints
// ============================================================================

std::string request_fingerprint(const CompletionRequest& request) {
    json payload = json::array();
    for (const PromptSection& s : request.sections) payload.push_back({s.name, s.text});
    json canon{{"task", to_string(request.task)}, {"sections", std::move(payload)}};
    return sha256_hex(canon.dump());
}

// ============================================================================
// Record protocol
// ============================================================================

namespace {

// Strips surrounding whitespace, one layer of parentheses, and per-field
// surrounding quotes. Model output is treated charitably: cosmetic wrapping
// varies, structure does not.
std::string clean_field(std::string_view field) {
    std::string f = trim(field);
    if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
    return trim(f);
}

}  // namespace

ParsedRecords parse_records(std::string_view raw, const RecordSchema& schema) {
    const std::size_t term = raw.find(kCompletionTerminator);
    if (term == std::string_view::npos)
        throw NoTerminatorError("completion lacks terminator; output considered truncated");

    ParsedRecords out;
    std::string_view body = raw.substr(0, term);
    for (const std::string& segment : split(body, kRecordDelimiter)) {
        std::string record = trim(segment);
        if (record.empty()) continue;
        if (record.size() >= 2 && record.front() == '(' && record.back() == ')')
            record = trim(std::string_view(record).substr(1, record.size() - 2));
        if (record.empty()) continue;

        std::vector<std::string> fields;
        for (const std::string& piece : split(record, kFieldDelimiter))
            fields.push_back(clean_field(piece));
        if (fields.empty() || fields[0].empty()) {
            ++out.dropped;
            continue;
        }
        auto it = schema.arity_by_kind.find(fields[0]);
        if (it == schema.arity_by_kind.end() || static_cast<int>(fields.size()) != it->second) {
            ++out.dropped;
            continue;
        }
        out.tuples.push_back(std::move(fields));
    }
    return out;
}

std::string render_records(const std::vector<std::vector<std::string>>& tuples) {
    std::string out;
    for (const auto& tuple : tuples) {
        out.push_back('(');
        for (std::size_t i = 0; i < tuple.size(); ++i) {
            if (i) out.append(kFieldDelimiter);
            out.push_back('"');
            out.append(tuple[i]);
            out.push_back('"');
        }
        out.push_back(')');
        out.append(kRecordDelimiter);
    }
    out.append(kCompletionTerminator);
    return out;
}

// ============================================================================
// Scripted embedding
// ============================================================================

std::vector<float> scripted_embedding(std::string_view text, std::uint64_t seed, int dim) {
    if (dim <= 0) throw ConfigError("embedding dimension must be positive");
    std::vector<double> acc(static_cast<std::size_t>(dim), 0.0);
    const auto spans = tokenize_spans(text);

    auto add_token = [&](std::string_view token) {
        std::string lowered = to_lower_ascii(token);
        std::uint64_t state = fnv1a64(lowered) ^ seed;
        for (int i = 0; i < dim; ++i) {
            // Map to (-1, 1); plain affine map keeps the arithmetic exact
            // and platform-independent.
            const std::uint64_t r = splitmix64(state);
            acc[static_cast<std::size_t>(i)] +=
                (double(r >> 11) / double(1ULL << 53)) * 2.0 - 1.0;
        }
    };

    if (spans.empty()) {
        add_token("");
    } else {
        for (const TokenSpan& s : spans) add_token(text.substr(s.begin, s.end - s.begin));
    }

    std::vector<float> out(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(acc[i]);
    l2_normalize(out);
    return out;
}

// ============================================================================
// ScriptedBackend
// ============================================================================

ScriptedBackend::ScriptedBackend(std::filesystem::path fixture_dir, std::uint64_t seed, int dim)
    : fixture_dir_(std::move(fixture_dir)), seed_(seed), dim_(dim) {}

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
    const std::string fp = request_fingerprint(request);
    const std::filesystem::path file = fixture_dir_ / to_string(request.task) / (fp + ".json");
    if (!std::filesystem::exists(file))
        throw FixtureMissingError(to_string(request.task), fp);

    json fixture = json::parse(read_text_file(file));
    if (fixture.value("truncated", false))
        throw OutputTruncatedError("fixture marks completion as truncated: " + fp);

    CompletionResult result;
    result.text = fixture.at("completion").get<std::string>();
    result.prompt_tokens = fixture.value("prompt_tokens",
                                         static_cast<long>(count_tokens(render_prompt(request))));
    result.completion_tokens =
        fixture.value("completion_tokens", static_cast<long>(count_tokens(result.text)));
    return result;
}

std::vector<std::vector<float>> ScriptedBackend::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) out.push_back(scripted_embedding(t, seed_, dim_));
    return out;
}

std::filesystem::path ScriptedBackend::write_fixture(const std::filesystem::path& fixture_dir,
                                                     const CompletionRequest& request,
                                                     std::string_view completion,
                                                     long prompt_tokens, long completion_tokens) {
    if (prompt_tokens < 0) prompt_tokens = static_cast<long>(count_tokens(render_prompt(request)));
    if (completion_tokens < 0) completion_tokens = static_cast<long>(count_tokens(completion));
    json fixture{{"completion", std::string(completion)},
                 {"prompt_tokens", prompt_tokens},
                 {"completion_tokens", completion_tokens}};
    const std::filesystem::path file =
        fixture_dir / to_string(request.task) / (request_fingerprint(request) + ".json");
    write_text_file(file, fixture.dump(2) + "\n");
    return file;
}

std::vector<std::vector<float>> CallbackBackend::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) out.push_back(scripted_embedding(t, seed_, dim_));
    return out;
}

// ============================================================================
// Provider facade
// ============================================================================

Provider::Provider(std::unique_ptr<Backend> backend, PriceTable prices, int parallelism)
    : backend_(std::move(backend)), prices_(prices), parallelism_(parallelism < 1 ? 1 : parallelism) {
    if (!backend_) throw ConfigError("provider requires a backend");
}

Provider::Completion Provider::complete(const CompletionRequest& request, Phase phase) {
    CompletionResult r = backend_->complete(request);
    record(phase, to_string(request.task), r.prompt_tokens, r.completion_tokens, 0);
    Completion out;
    out.text = std::move(r.text);
    out.delta.phase = phase;
    out.delta.prompt_tokens = r.prompt_tokens;
    out.delta.completion_tokens = r.completion_tokens;
    out.delta.embedding_tokens = 0;
    out.delta.usd_cost = prices_.usd(r.prompt_tokens, r.completion_tokens, 0);
    return out;
}

std::vector<std::vector<float>> Provider::embed(const std::vector<std::string>& texts,
                                                Phase phase) {
    if (texts.empty()) return {};
    auto vectors = backend_->embed(texts);
    if (vectors.size() != texts.size())
        throw Error("backend returned wrong number of embeddings");
    long tokens = 0;
    for (const std::string& t : texts) tokens += static_cast<long>(count_tokens(t));
    for (auto& v : vectors) {
        if (static_cast<int>(v.size()) != backend_->dimension())
            throw DimensionMismatchError("backend embedding has wrong dimension");
        l2_normalize(v);
    }
    record(phase, "embed", 0, 0, tokens);
    return vectors;
}

ProviderUsage Provider::usage_snapshot(Phase phase) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto& c = counters_[static_cast<int>(phase)];
    ProviderUsage u;
    u.phase = phase;
    u.prompt_tokens = c[0];
    u.completion_tokens = c[1];
    u.embedding_tokens = c[2];
    u.usd_cost = prices_.usd(c[0], c[1], c[2]);
    return u;
}

std::vector<UsageRecord> Provider::usage_log() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_;
}

void Provider::record(Phase phase, const std::string& task, long prompt, long completion,
                      long embedding) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& c = counters_[static_cast<int>(phase)];
    c[0] += prompt;
    c[1] += completion;
    c[2] += embedding;
    log_.push_back(UsageRecord{to_string(phase), task, prompt, completion, embedding});
}

ProviderUsage fold_usage(std::span<const UsageRecord> records, Phase phase,
                         const PriceTable& prices) {
    ProviderUsage u;
    u.phase = phase;
    const std::string want = to_string(phase);
    for (const UsageRecord& r : records) {
        if (r.phase != want) continue;
        u.prompt_tokens += r.prompt_tokens;
        u.completion_tokens += r.completion_tokens;
        u.embedding_tokens += r.embedding_tokens;
    }
    u.usd_cost = prices.usd(u.prompt_tokens, u.completion_tokens, u.embedding_tokens);
    return u;
}

void save_usage_jsonl(const std::filesystem::path& file, std::span<const UsageRecord> records) {
    std::ostringstream out;
    for (const UsageRecord& r : records) {
        json row{{"phase", r.phase},
                 {"task", r.task},
                 {"prompt_tokens", r.prompt_tokens},
                 {"completion_tokens", r.completion_tokens},
                 {"embedding_tokens", r.embedding_tokens}};
        out << row.dump() << '\n';
    }
    write_text_file(file, out.str());
}

void append_usage_jsonl(const std::filesystem::path& file, std::span<const UsageRecord> records) {
    if (records.empty()) return;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot open usage log for append: " + file.string());
    for (const UsageRecord& r : records) {
        json row{{"phase", r.phase},
                 {"task", r.task},
                 {"prompt_tokens", r.prompt_tokens},
                 {"completion_tokens", r.completion_tokens},
                 {"embedding_tokens", r.embedding_tokens}};
        out << row.dump() << '\n';
    }
}

std::vector<UsageRecord> load_usage_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open usage log: " + file.string());
    std::vector<UsageRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line);
        UsageRecord r;
        r.phase = row.at("phase").get<std::string>();
        r.task = row.at("task").get<std::string>();
        r.prompt_tokens = row.at("prompt_tokens").get<long>();
        r.completion_tokens = row.at("completion_tokens").get<long>();
        r.embedding_tokens = row.at("embedding_tokens").get<long>();
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace gosu
