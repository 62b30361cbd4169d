#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gosu {

// ============================================================================
// Requests
// ============================================================================

// Every provider call is tagged with the pipeline stage that issued it, so
// usage can be attributed and fixtures can be bucketed per stage.
enum class TaskTag {
    su_extract,
    su_judge,
    su_refine,
    pre_kg_extract,
    su_entrel_extract,
    keyword_extract,
    answer_gen,
    judge_pair,
};

const char* to_string(TaskTag tag) noexcept;
std::optional<TaskTag> task_tag_from_string(std::string_view name) noexcept;

// One named block of request payload (e.g. "chunk" -> chunk text). Section
// names are unique within a request.
struct PromptSection {
    std::string name;
    std::string text;
};

struct CompletionRequest {
    TaskTag task = TaskTag::su_extract;
    std::vector<PromptSection> sections;
    int max_output_tokens = 2048;
};

// Content address of a request: SHA-256 over the task tag and the payload
// sections, canonically serialized. max_output_tokens is deliberately
// excluded so fixture lookups survive ceiling tweaks.
std::string request_fingerprint(const CompletionRequest& request);

// Full prompt text a live model sees: task instruction, payload sections,
// output-format contract. Changing any template intentionally changes what
// live backends receive, but never changes fingerprints.
std::string render_prompt(const CompletionRequest& request);

// ============================================================================
// Structured-output record protocol
// ============================================================================

inline constexpr std::string_view kFieldDelimiter = "<|>";
inline constexpr std::string_view kRecordDelimiter = "##";
inline constexpr std::string_view kCompletionTerminator = "<|COMPLETE|>";

// Allowed record kinds and their total field counts (the kind field included).
struct RecordSchema {
    std::map<std::string, int> arity_by_kind;
};

struct ParsedRecords {
    std::vector<std::vector<std::string>> tuples;  // tuples[i][0] is the kind
    int dropped = 0;                               // malformed records skipped
};

// Splits a raw completion into field tuples. The terminator must be present
// (NoTerminatorError otherwise — missing terminator means truncation, never
// an empty result). Records with unknown kinds or wrong arity are dropped
// and counted, not fatal.
ParsedRecords parse_records(std::string_view raw, const RecordSchema& schema);

// Inverse of parse_records for fixture authoring and round-trip tests.
std::string render_records(const std::vector<std::vector<std::string>>& tuples);

// ============================================================================
// Usage accounting
// ============================================================================

enum class Phase { build, query };
const char* to_string(Phase phase) noexcept;

// USD per token. Defaults to zero so offline runs cost nothing.
struct PriceTable {
    double prompt = 0.0;
    double completion = 0.0;
    double embedding = 0.0;

    double usd(long prompt_tokens, long completion_tokens, long embedding_tokens) const noexcept {
        return double(prompt_tokens) * prompt + double(completion_tokens) * completion +
               double(embedding_tokens) * embedding;
    }
};

struct ProviderUsage {
    Phase phase = Phase::build;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long embedding_tokens = 0;
    double usd_cost = 0.0;
};

// One provider call, as persisted to the usage log. Token counts are integers
// so the snapshot equals the sum of deltas exactly under any interleaving;
// USD is always derived from token counts at reporting time.
struct UsageRecord {
    std::string phase;
    std::string task;  // task tag, or "embed"
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long embedding_tokens = 0;
};

// ============================================================================
// Backends
// ============================================================================

struct CompletionResult {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
    // Returns one unit-norm vector per input text, all with dimension().
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
    virtual int dimension() const noexcept = 0;
};

// Deterministic unit-norm embedding: each token hashes to a seeded
// pseudo-random vector; the token-bag sum is L2-normalized. Same seed + same
// text gives the same vector on every platform.
std::vector<float> scripted_embedding(std::string_view text, std::uint64_t seed, int dim);

// Replays completions from a fixture store on disk; embeddings come from
// scripted_embedding. A request with no fixture raises FixtureMissingError
// naming the fingerprint — closed world, nothing is invented.
//
// Store layout: <dir>/<task_tag>/<fingerprint>.json with fields
// {"completion", "prompt_tokens", "completion_tokens"} and optionally
// {"truncated": true} to simulate an output-ceiling hit.
class ScriptedBackend final : public Backend {
public:
    ScriptedBackend(std::filesystem::path fixture_dir, std::uint64_t seed, int dim);

    CompletionResult complete(const CompletionRequest& request) override;
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    int dimension() const noexcept override { return dim_; }

    // Authors one fixture so that a later complete() with the same request
    // finds it. Token counts default to tokenizer counts of the rendered
    // prompt and the completion.
    static std::filesystem::path write_fixture(const std::filesystem::path& fixture_dir,
                                               const CompletionRequest& request,
                                               std::string_view completion,
                                               long prompt_tokens = -1,
                                               long completion_tokens = -1);

private:
    std::filesystem::path fixture_dir_;
    std::uint64_t seed_;
    int dim_;
};

// Routes completions to an arbitrary function; embeddings stay scripted.
// Meant for tests that want programmable behavior without fixture files.
class CallbackBackend final : public Backend {
public:
    using CompleteFn = std::function<CompletionResult(const CompletionRequest&)>;

    CallbackBackend(CompleteFn fn, std::uint64_t seed, int dim)
        : fn_(std::move(fn)), seed_(seed), dim_(dim) {}

    CompletionResult complete(const CompletionRequest& request) override { return fn_(request); }
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    int dimension() const noexcept override { return dim_; }

private:
    CompleteFn fn_;
    std::uint64_t seed_;
    int dim_;
};

// OpenAI-compatible HTTP backend (chat completions + embeddings). Bounded
// retries with jittered backoff; BackendUnavailableError after the last
// attempt, OutputTruncatedError when the model stops on the length limit.
struct LiveBackendConfig {
    std::string endpoint = "http://localhost:8000/v1";
    std::string model = "gpt-4o-mini";
    std::string embed_model = "bge-m3";
    std::string api_key_env = "GOSU_API_KEY";
    int dimension = 1024;
    int max_retries = 3;
    int timeout_seconds = 120;
};

class LiveBackend final : public Backend {
public:
    explicit LiveBackend(LiveBackendConfig config);
    CompletionResult complete(const CompletionRequest& request) override;
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    int dimension() const noexcept override { return config_.dimension; }

private:
    LiveBackendConfig config_;
};

// ============================================================================
// Provider facade
// ============================================================================

// Wraps a backend with usage metering, pricing, and a per-call log. All
// counters are exact integer sums; usd is derived from them on demand.
class Provider {
public:
    struct Completion {
        std::string text;
        ProviderUsage delta;
    };

    Provider(std::unique_ptr<Backend> backend, PriceTable prices, int parallelism = 4);

    Completion complete(const CompletionRequest& request, Phase phase);

    // Embeds a batch; embedding token usage is the tokenizer count of the
    // inputs. Returned vectors are unit-norm, dimension() wide.
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts, Phase phase);

    ProviderUsage usage_snapshot(Phase phase) const;
    std::vector<UsageRecord> usage_log() const;

    int dimension() const noexcept { return backend_->dimension(); }
    int parallelism() const noexcept { return parallelism_; }
    const PriceTable& prices() const noexcept { return prices_; }

private:
    void record(Phase phase, const std::string& task, long prompt, long completion, long embedding);

    std::unique_ptr<Backend> backend_;
    PriceTable prices_;
    int parallelism_;
    mutable std::mutex mu_;
    long counters_[2][3] = {{0, 0, 0}, {0, 0, 0}};  // [phase][prompt|completion|embedding]
    std::vector<UsageRecord> log_;
};

// Aggregates a usage log back into per-phase totals; used by cost reporting
// so a persisted log and a live meter always agree.
ProviderUsage fold_usage(std::span<const UsageRecord> records, Phase phase,
                         const PriceTable& prices);

// usage.jsonl round-trip; append is used by the query path so a data_dir
// accumulates query usage across processes.
void save_usage_jsonl(const std::filesystem::path& file, std::span<const UsageRecord> records);
void append_usage_jsonl(const std::filesystem::path& file, std::span<const UsageRecord> records);
std::vector<UsageRecord> load_usage_jsonl(const std::filesystem::path& file);

}  // namespace gosu
