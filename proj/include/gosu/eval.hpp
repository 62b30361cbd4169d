#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gosu/provider.hpp"

namespace gosu {

enum class Dimension { comprehensiveness, diversity, empowerment, overall };
const char* to_string(Dimension dim) noexcept;
std::optional<Dimension> dimension_from_string(std::string_view name) noexcept;

enum class Verdict { a, b, inconclusive };
const char* to_string(Verdict verdict) noexcept;

// What one judging call said, mapped back to the underlying answer labels.
enum class PositionPick { answer_a, answer_b, unparseable };
const char* to_string(PositionPick pick) noexcept;

// Both orderings of one (question, dimension) comparison. The verdict is
// conclusive only when the two orderings agree on the same underlying
// answer; an unparseable judgment counts as disagreement.
struct PairJudgment {
    std::string question_id;
    Dimension dimension = Dimension::comprehensiveness;
    PositionPick order_ab = PositionPick::unparseable;  // winner with A presented first
    PositionPick order_ba = PositionPick::unparseable;  // winner with B presented first
    Verdict verdict = Verdict::inconclusive;
};

// Judge request for one presentation order. `first`/`second` are the answers
// as shown; randomization happens in judge_pair.
CompletionRequest make_judge_request(const std::string& question, const std::string& first,
                                     const std::string& second, Dimension dimension);

// Runs the two-call alternating protocol: the first call's presentation
// order is seeded from question_id, the second call swaps it. Completion
// "1"/"2" picks the answer in that position; anything else is unparseable.
PairJudgment judge_pair(Provider& provider, const std::string& question_id,
                        const std::string& question, const std::string& answer_a,
                        const std::string& answer_b, Dimension dimension,
                        Phase phase = Phase::query);

// Majority vote over the three primary dimensions; ties fall back to the
// judged overall dimension; failing that, inconclusive.
Verdict overall_preference(const std::map<Dimension, Verdict>& by_dimension);

struct DimensionRates {
    long wins_a = 0;
    long wins_b = 0;
    long inconclusive = 0;
    // Percentages over conclusive judgments; absent when none were conclusive.
    std::optional<double> rate_a;
    std::optional<double> rate_b;
    std::optional<double> gap;  // winner rate minus loser rate
};

struct WinRateTable {
    std::map<Dimension, DimensionRates> rows;
};

// Tallies raw judgments for the three primary dimensions; the overall row
// tallies the derived per-question overall preference (majority + tie-break),
// not the raw overall-dimension judgments.
WinRateTable win_rates(std::span<const PairJudgment> judgments);

struct CostReport {
    long chunk_count = 0;
    long query_count = 0;
    // Each metric is absent when its denominator is zero.
    std::optional<double> tokens_per_chunk;   // build embedding tokens / chunks
    std::optional<double> cost_per_chunk;     // build usd / chunks
    std::optional<double> tokens_per_query;   // query embedding tokens / queries
    std::optional<double> cost_per_query;     // query usd / queries
};

CostReport cost_report(std::span<const UsageRecord> records, const PriceTable& prices,
                       long chunk_count, long query_count);

// ============================================================================
// File formats for the eval CLI
// ============================================================================

struct EvalQuestion {
    std::string question_id;
    std::string question;
};

std::vector<EvalQuestion> load_questions_jsonl(const std::filesystem::path& file);

// answers: question_id -> answer text
std::map<std::string, std::string> load_answers_jsonl(const std::filesystem::path& file);

void save_judgments_jsonl(const std::filesystem::path& file,
                          std::span<const PairJudgment> judgments);

std::string win_rate_table_json(const WinRateTable& table);
std::string cost_report_json(const CostReport& report);

}  // namespace gosu
