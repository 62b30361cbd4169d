#include <string>

#include "gosu/provider.hpp"

namespace gosu {

namespace {

// Instruction blocks shown to live models. The structured tasks all end with
// the same output contract: parenthesized records, "<|>" between fields,
// "##" between records, "<|COMPLETE|>" at the end.

constexpr const char* kRecordContract = R"(
Output format, exactly:
- one record per finding, wrapped in parentheses
- fields separated by <|>
- records separated by ##
- finish the whole output with <|COMPLETE|>
)";

constexpr const char* kSuExtractInstruction = R"(You are building a knowledge base. Read the text below and extract the
semantic units it expresses: self-contained statements of one coherent fact,
event, or claim, each with a short uppercase name and a one-to-three sentence
description grounded only in the text.

Records: ("semantic_unit"<|>"NAME"<|>"description")
)";

constexpr const char* kSuJudgeInstruction = R"(You are deduplicating a knowledge base. Decide whether the two semantic
units below describe the same underlying fact, event, or claim. Answer with
exactly one word: YES if they should merge, NO otherwise.
)";

constexpr const char* kSuRefineInstruction = R"(The semantic units below were judged to describe the same underlying fact.
Merge them into a single unit, using the evidence passages to resolve wording
conflicts. Keep every detail that is supported by the evidence.

Records: ("semantic_unit"<|>"NAME"<|>"description") — output exactly one.
)";

constexpr const char* kPreKgInstruction = R"(Extract the entities and binary relations stated in the text below.

Records:
  ("entity"<|>"NAME"<|>"type"<|>"description")
  ("relation"<|>"SOURCE ENTITY"<|>"TARGET ENTITY"<|>"description"<|>"keyword, keyword")
)";

constexpr const char* kSuEntRelInstruction = R"(A semantic unit and one of its source passages follow. Extract the entities
that participate in the unit and the relations among them, grounded in the
passage.

Records:
  ("entity"<|>"NAME"<|>"type"<|>"description")
  ("relation"<|>"SOURCE ENTITY"<|>"TARGET ENTITY"<|>"description"<|>"keyword, keyword")
)";

constexpr const char* kKeywordInstruction = R"(Decompose the question below into retrieval keywords at three levels:
  low  — concrete entity names to look up directly
  sem  — event- or fact-level phrases describing what happened
  high — abstract themes or topic areas

Records: ("low"<|>"keyword") / ("sem"<|>"phrase") / ("high"<|>"theme")
)";

constexpr const char* kAnswerInstruction = R"(Answer the question using only the context sections provided. Cite nothing
that the context does not support; say so if the context is insufficient.
)";

constexpr const char* kJudgePairInstruction = R"(Two answers to the same question follow. Judge which answer is better on the
stated dimension only. Reply with exactly one character: 1 if Answer 1 is
better, 2 if Answer 2 is better.
)";

const char* instruction_for(TaskTag tag) {
    switch (tag) {
        case TaskTag::su_extract: return kSuExtractInstruction;
        case TaskTag::su_judge: return kSuJudgeInstruction;
        case TaskTag::su_refine: return kSuRefineInstruction;
        case TaskTag::pre_kg_extract: return kPreKgInstruction;
        case TaskTag::su_entrel_extract: return kSuEntRelInstruction;
        case TaskTag::keyword_extract: return kKeywordInstruction;
        case TaskTag::answer_gen: return kAnswerInstruction;
        case TaskTag::judge_pair: return kJudgePairInstruction;
    }
    return "";
}

bool uses_record_contract(TaskTag tag) {
    switch (tag) {
        case TaskTag::su_extract:
        case TaskTag::su_refine:
        case TaskTag::pre_kg_extract:
        case TaskTag::su_entrel_extract:
        case TaskTag::keyword_extract:
            return true;
        default:
            return false;
    }
}

}  // namespace

std::string render_prompt(const CompletionRequest& request) {
    std::string out = instruction_for(request.task);
    if (uses_record_contract(request.task)) out += kRecordContract;
    for (const PromptSection& s : request.sections) {
        out += "\n### ";
        out += s.name;
        out += "\n";
        out += s.text;
        out += "\n";
    }
    return out;
}

}  // namespace gosu
