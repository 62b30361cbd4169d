#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gosu/config.hpp"
#include "gosu/engine.hpp"

namespace gosu::testing {

// A self-contained miniature setup for offline runs: a three-document
// clinical corpus, a scripted-provider fixture set covering every request
// the pipeline issues for it, five canned queries, and the hand-traced
// census the build must reproduce exactly. The quickstart, the integration
// suite, and the fixture-generation tool all share this one source of truth.

// Writes trial.txt / guideline.txt / mechanism.txt under dir.
void write_demo_corpus(const std::filesystem::path& dir);

// The configuration the fixtures are authored against. Paths resolve under
// work_dir: data under work_dir/data, fixtures under work_dir/fixtures.
// sim_tau is deliberately low — at three documents the scripted token-bag
// embeddings put the intended merge pair well below real-corpus levels.
EngineConfig demo_config(const std::filesystem::path& work_dir);

struct DemoQuery {
    std::string id;
    std::string question;
    std::string answer;  // the scripted completion the engine returns
};

const std::vector<DemoQuery>& demo_queries();

// Expected build manifest counts, traced by hand from the fixture texts.
BuildCounts demo_census();

// Authors every fixture the demo corpus needs, in dependency order:
//   1. unit extraction and chunk-level extraction completions (static)
//   2. merge judgments and the refinement completion, discovered by running
//      the real optimizer against a recording backend
//   3. unit-conditioned extraction completions, including the two extra
//      variants an optimizer-disabled build requests
//   4. per-query keyword completions
//   5. per-query answer completions, bound to the exact context a freshly
//      built engine renders (built in scratch_dir, then discarded)
// Also writes the demo corpus into corpus_dir. Returns the number of fixture
// files written. Idempotent: rerunning rewrites identical files.
int generate_demo_fixtures(const EngineConfig& config, const std::filesystem::path& corpus_dir,
                           const std::filesystem::path& scratch_dir);

// Pairwise-evaluation demo: two questions with competing answer files and
// scripted judgments covering a clean win, a position-biased (inconclusive)
// dimension, and an unparseable one. Writes questions.jsonl, answers_a.jsonl
// and answers_b.jsonl under dir; judge fixtures go to fixtures_dir.
void write_demo_eval_files(const std::filesystem::path& dir,
                           const std::filesystem::path& fixtures_dir);

}  // namespace gosu::testing
