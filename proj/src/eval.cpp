#include "gosu/eval.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"
#include "json.hpp"

namespace gosu {

using nlohmann::json;

// ============================================================================
// Enum plumbing
// ============================================================================

const char* to_string(Dimension dim) noexcept {
    switch (dim) {
        case Dimension::comprehensiveness: return "comprehensiveness";
        case Dimension::diversity: return "diversity";
        case Dimension::empowerment: return "empowerment";
        case Dimension::overall: return "overall";
    }
    return "?";
}

std::optional<Dimension> dimension_from_string(std::string_view name) noexcept {
    for (Dimension dim : {Dimension::comprehensiveness, Dimension::diversity,
                          Dimension::empowerment, Dimension::overall}) {
        if (name == to_string(dim)) return dim;
    }
    return std::nullopt;
}

const char* to_string(Verdict verdict) noexcept {
    switch (verdict) {
        case Verdict::a: return "a";
        case Verdict::b: return "b";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

const char* to_string(PositionPick pick) noexcept {
    switch (pick) {
        case PositionPick::answer_a: return "answer_a";
        case PositionPick::answer_b: return "answer_b";
        case PositionPick::unparseable: return "unparseable";
    }
    return "?";
}

// ============================================================================
// Pairwise judging
// ============================================================================

CompletionRequest make_judge_request(const std::string& question, const std::string& first,
                                     const std::string& second, Dimension dimension) {
    CompletionRequest req;
    req.task = TaskTag::judge_pair;
    req.sections.push_back({"dimension", to_string(dimension)});
    req.sections.push_back({"question", question});
    req.sections.push_back({"answer_1", first});
    req.sections.push_back({"answer_2", second});
    req.max_output_tokens = 8;
    return req;
}

namespace {

// Which position the judge picked: first non-space character must be 1 or 2.
int parse_pick(const std::string& completion) {
    for (char ch : completion) {
        if (std::isspace(static_cast<unsigned char>(ch))) continue;
        if (ch == '1') return 1;
        if (ch == '2') return 2;
        return 0;
    }
    return 0;
}

// Maps a positional pick back to the underlying answer given whether A was
// shown first.
PositionPick resolve_pick(int pick, bool a_first) {
    if (pick == 0) return PositionPick::unparseable;
    const bool picked_first = pick == 1;
    return picked_first == a_first ? PositionPick::answer_a : PositionPick::answer_b;
}

}  // namespace

PairJudgment judge_pair(Provider& provider, const std::string& question_id,
                        const std::string& question, const std::string& answer_a,
                        const std::string& answer_b, Dimension dimension, Phase phase) {
    PairJudgment out;
    out.question_id = question_id;
    out.dimension = dimension;

    const bool a_first = (fnv1a64(question_id) & 1) == 0;

    const auto ask = [&](bool a_shown_first) {
        const std::string& first = a_shown_first ? answer_a : answer_b;
        const std::string& second = a_shown_first ? answer_b : answer_a;
        auto result = provider.complete(make_judge_request(question, first, second, dimension),
                                        phase);
        return resolve_pick(parse_pick(result.text), a_shown_first);
    };

    // The seed only decides which presentation is asked first; the fields
    // always hold the picks by presentation order, not call order.
    const PositionPick first_call = ask(a_first);
    const PositionPick second_call = ask(!a_first);
    out.order_ab = a_first ? first_call : second_call;
    out.order_ba = a_first ? second_call : first_call;

    if (out.order_ab == out.order_ba && out.order_ab != PositionPick::unparseable) {
        out.verdict = out.order_ab == PositionPick::answer_a ? Verdict::a : Verdict::b;
    } else {
        out.verdict = Verdict::inconclusive;
    }
    return out;
}

Verdict overall_preference(const std::map<Dimension, Verdict>& by_dimension) {
    int votes_a = 0;
    int votes_b = 0;
    for (Dimension dim : {Dimension::comprehensiveness, Dimension::diversity,
                          Dimension::empowerment}) {
        auto it = by_dimension.find(dim);
        if (it == by_dimension.end()) continue;
        if (it->second == Verdict::a) ++votes_a;
        if (it->second == Verdict::b) ++votes_b;
    }
    if (votes_a > votes_b) return Verdict::a;
    if (votes_b > votes_a) return Verdict::b;
    auto it = by_dimension.find(Dimension::overall);
    if (it != by_dimension.end()) return it->second;
    return Verdict::inconclusive;
}

// ============================================================================
// Win rates
// ============================================================================

namespace {

void finish_rates(DimensionRates& rates) {
    const long conclusive = rates.wins_a + rates.wins_b;
    if (conclusive == 0) return;
    rates.rate_a = 100.0 * static_cast<double>(rates.wins_a) / static_cast<double>(conclusive);
    rates.rate_b = 100.0 * static_cast<double>(rates.wins_b) / static_cast<double>(conclusive);
    rates.gap = *rates.rate_a >= *rates.rate_b ? *rates.rate_a - *rates.rate_b
                                               : *rates.rate_b - *rates.rate_a;
}

void tally(DimensionRates& rates, Verdict verdict) {
    switch (verdict) {
        case Verdict::a: ++rates.wins_a; break;
        case Verdict::b: ++rates.wins_b; break;
        case Verdict::inconclusive: ++rates.inconclusive; break;
    }
}

}  // namespace

WinRateTable win_rates(std::span<const PairJudgment> judgments) {
    WinRateTable table;
    for (Dimension dim : {Dimension::comprehensiveness, Dimension::diversity,
                          Dimension::empowerment, Dimension::overall}) {
        table.rows[dim] = {};
    }

    // question_id -> dimension -> verdict, for the derived overall row.
    std::map<std::string, std::map<Dimension, Verdict>> by_question;

    for (const PairJudgment& judgment : judgments) {
        by_question[judgment.question_id][judgment.dimension] = judgment.verdict;
        if (judgment.dimension != Dimension::overall) {
            tally(table.rows[judgment.dimension], judgment.verdict);
        }
    }
    for (const auto& [question_id, verdicts] : by_question) {
        tally(table.rows[Dimension::overall], overall_preference(verdicts));
    }
    for (auto& [dim, rates] : table.rows) finish_rates(rates);
    return table;
}

// ============================================================================
// Cost report
// ============================================================================

CostReport cost_report(std::span<const UsageRecord> records, const PriceTable& prices,
                       long chunk_count, long query_count) {
    CostReport report;
    report.chunk_count = chunk_count;
    report.query_count = query_count;

    const ProviderUsage build = fold_usage(records, Phase::build, prices);
    const ProviderUsage query = fold_usage(records, Phase::query, prices);

    if (chunk_count > 0) {
        report.tokens_per_chunk =
            static_cast<double>(build.embedding_tokens) / static_cast<double>(chunk_count);
        report.cost_per_chunk = build.usd_cost / static_cast<double>(chunk_count);
    }
    if (query_count > 0) {
        report.tokens_per_query =
            static_cast<double>(query.embedding_tokens) / static_cast<double>(query_count);
        report.cost_per_query = query.usd_cost / static_cast<double>(query_count);
    }
    return report;
}

// ============================================================================
// File formats
// ============================================================================

std::vector<EvalQuestion> load_questions_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open questions file: " + file.string());
    std::vector<EvalQuestion> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line);
        out.push_back({row.at("question_id").get<std::string>(),
                       row.at("question").get<std::string>()});
    }
    return out;
}

std::map<std::string, std::string> load_answers_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open answers file: " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line);
        out[row.at("question_id").get<std::string>()] = row.at("answer").get<std::string>();
    }
    return out;
}

void save_judgments_jsonl(const std::filesystem::path& file,
                          std::span<const PairJudgment> judgments) {
    std::ostringstream out;
    for (const PairJudgment& judgment : judgments) {
        json row;
        row["question_id"] = judgment.question_id;
        row["dimension"] = to_string(judgment.dimension);
        row["order_ab"] = to_string(judgment.order_ab);
        row["order_ba"] = to_string(judgment.order_ba);
        row["verdict"] = to_string(judgment.verdict);
        out << row.dump() << '\n';
    }
    write_text_file(file, out.str());
}

namespace {

json rates_json(const DimensionRates& rates) {
    json row;
    row["wins_a"] = rates.wins_a;
    row["wins_b"] = rates.wins_b;
    row["inconclusive"] = rates.inconclusive;
    if (rates.rate_a) row["rate_a"] = *rates.rate_a;
    if (rates.rate_b) row["rate_b"] = *rates.rate_b;
    if (rates.gap) row["gap"] = *rates.gap;
    return row;
}

}  // namespace

std::string win_rate_table_json(const WinRateTable& table) {
    json doc;
    for (const auto& [dim, rates] : table.rows) {
        doc[to_string(dim)] = rates_json(rates);
    }
    return doc.dump(2) + "\n";
}

std::string cost_report_json(const CostReport& report) {
    json doc;
    doc["chunk_count"] = report.chunk_count;
    doc["query_count"] = report.query_count;
    if (report.tokens_per_chunk) doc["tokens_per_chunk"] = *report.tokens_per_chunk;
    if (report.cost_per_chunk) doc["cost_per_chunk"] = *report.cost_per_chunk;
    if (report.tokens_per_query) doc["tokens_per_query"] = *report.tokens_per_query;
    if (report.cost_per_query) doc["cost_per_query"] = *report.cost_per_query;
    return doc.dump(2) + "\n";
}

}  // namespace gosu
