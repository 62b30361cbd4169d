// gosu — build, query, serve, evaluate, and inspect a semantic-unit engine.
//
// Exit codes: 0 success, 1 error, 2 retrieval found no usable context.

#include <cstdlib>
#include <iostream>
#include <memory>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "gosu/config.hpp"
#include "gosu/engine.hpp"
#include "gosu/errors.hpp"
#include "gosu/eval.hpp"
#include "gosu/graph.hpp"
#include "gosu/service.hpp"
#include "gosu/util.hpp"

namespace {

using namespace gosu;

struct GlobalArgs {
    std::string config_file;
};

// Config file (if any), then the GOSU_DATA_DIR override.
EngineConfig effective_config(const GlobalArgs& args) {
    EngineConfig config;
    if (!args.config_file.empty()) config = load_config(args.config_file);
    if (const char* env = std::getenv("GOSU_DATA_DIR"); env && *env) config.data_dir = env;
    config.validate();
    return config;
}

std::shared_ptr<Provider> provider_for(const EngineConfig& config) {
    return std::shared_ptr<Provider>(make_provider(config.provider));
}

// ----------------------------------------------------------------------------

int cmd_build(const GlobalArgs& args, const std::string& corpus, bool no_go) {
    EngineConfig config = effective_config(args);
    if (no_go) config.optimizer.enabled = false;
    auto provider = provider_for(config);
    const BuildManifest manifest = build_engine(corpus, config, *provider);
    std::cout << manifest_to_json(manifest);
    return 0;
}

int cmd_query(const GlobalArgs& args, const std::string& question, const LayerFlags& flags,
              const std::string& dump_context) {
    const EngineConfig config = effective_config(args);
    Engine engine(config, provider_for(config));
    const QueryResult result = engine.query(question, flags);
    if (!dump_context.empty()) write_text_file(dump_context, result.context_text);
    std::cout << result.answer << "\n";
    return 0;
}

int cmd_serve(const GlobalArgs& args, const std::string& host, int port) {
    const EngineConfig config = effective_config(args);
    QueryService service;

    // The port opens first; every route answers 503 until the load lands.
    std::thread loader([&] {
        try {
            service.attach(std::make_shared<Engine>(config, provider_for(config)));
            std::cerr << "engine loaded; serving " << config.data_dir.string() << "\n";
        } catch (const std::exception& ex) {
            std::cerr << "engine load failed: " << ex.what() << "\n";
            service.stop();
        }
    });
    std::cerr << "listening on " << host << ":" << port << "\n";
    const bool ok = service.listen(host, port);
    loader.join();
    if (!ok) {
        std::cerr << "could not listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

int cmd_eval_run(const GlobalArgs& args, const std::string& questions_file,
                 const std::vector<std::string>& answer_files, const std::string& out_dir) {
    const EngineConfig config = effective_config(args);
    auto provider = provider_for(config);

    const auto questions = load_questions_jsonl(questions_file);
    const auto answers_a = load_answers_jsonl(answer_files.at(0));
    const auto answers_b = load_answers_jsonl(answer_files.at(1));

    std::vector<PairJudgment> judgments;
    for (const EvalQuestion& question : questions) {
        const auto a = answers_a.find(question.question_id);
        const auto b = answers_b.find(question.question_id);
        if (a == answers_a.end() || b == answers_b.end()) {
            throw Error("no answer pair for question " + question.question_id);
        }
        for (Dimension dim : {Dimension::comprehensiveness, Dimension::diversity,
                              Dimension::empowerment, Dimension::overall}) {
            judgments.push_back(judge_pair(*provider, question.question_id, question.question,
                                           a->second, b->second, dim));
        }
    }

    const std::filesystem::path out(out_dir);
    save_judgments_jsonl(out / "judgments.jsonl", judgments);
    const std::string table = win_rate_table_json(win_rates(judgments));
    write_text_file(out / "winrates.json", table);
    std::cout << table;
    return 0;
}

int cmd_eval_cost(const GlobalArgs& args, std::string usage_file, long chunks, long queries,
                  const std::string& out_file) {
    const EngineConfig config = effective_config(args);
    const DataLayout layout{config.data_dir};
    if (usage_file.empty()) usage_file = layout.usage_file().string();
    const std::vector<UsageRecord> records = load_usage_jsonl(usage_file);

    if (chunks < 0) {
        chunks = 0;
        if (std::filesystem::exists(layout.manifest_file())) {
            chunks = load_manifest(layout.manifest_file()).counts.chunks;
        }
    }
    if (queries < 0) {
        // Each answered query produced exactly one answer completion.
        queries = 0;
        for (const UsageRecord& record : records) {
            if (record.phase == to_string(Phase::query) &&
                record.task == to_string(TaskTag::answer_gen)) {
                ++queries;
            }
        }
    }

    const std::string report =
        cost_report_json(cost_report(records, config.provider.prices(), chunks, queries));
    write_text_file(out_file, report);
    std::cout << report;
    return 0;
}

int cmd_export_graphml(const GlobalArgs& args, const std::string& out_file) {
    const EngineConfig config = effective_config(args);
    const KnowledgeGraph graph = load_graph(DataLayout{config.data_dir}.graph_dir());
    const std::string xml = to_graphml(graph);
    if (out_file.empty()) {
        std::cout << xml;
    } else {
        write_text_file(out_file, xml);
    }
    return 0;
}

int cmd_stats(const GlobalArgs& args) {
    const EngineConfig config = effective_config(args);
    const DataLayout layout{config.data_dir};
    nlohmann::json doc = nlohmann::json::parse(manifest_to_json(load_manifest(layout.manifest_file())));

    nlohmann::json usage;
    long query_count = 0;
    if (std::filesystem::exists(layout.usage_file())) {
        const auto records = load_usage_jsonl(layout.usage_file());
        for (Phase phase : {Phase::build, Phase::query}) {
            const ProviderUsage total = fold_usage(records, phase, config.provider.prices());
            nlohmann::json& row = usage[to_string(phase)];
            row["prompt_tokens"] = total.prompt_tokens;
            row["completion_tokens"] = total.completion_tokens;
            row["embedding_tokens"] = total.embedding_tokens;
            row["usd"] = total.usd_cost;
        }
        for (const UsageRecord& record : records) {
            if (record.phase == to_string(Phase::query) &&
                record.task == to_string(TaskTag::answer_gen)) {
                ++query_count;
            }
        }
    }
    doc["logged_usage"] = usage;
    doc["query_count"] = query_count;
    std::cout << doc.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gosu — globally optimized semantic-unit retrieval engine"};
    app.require_subcommand(1);

    GlobalArgs globals;
    app.add_option("--config", globals.config_file, "engine config file (TOML-like)");

    // build
    std::string corpus;
    bool no_go = false;
    CLI::App* build = app.add_subcommand("build", "ingest a corpus and build every artifact");
    build->add_option("--corpus", corpus, "corpus directory or .jsonl file")->required();
    build->add_flag("--no-go", no_go,
                    "skip global optimization; candidates become units verbatim (w/o GO)");

    // query
    std::string question, dump_context;
    bool no_el = false, no_rl = false, no_sl = false;
    CLI::App* query = app.add_subcommand("query", "answer one question against a built engine");
    query->add_option("question", question, "the question to answer")->required();
    query->add_flag("--no-el", no_el, "disable the entity layer (w/o EL)");
    query->add_flag("--no-rl", no_rl, "disable the relation layer (w/o RL)");
    query->add_flag("--no-sl", no_sl, "disable the semantic-unit layer (w/o SL)");
    query->add_option("--dump-context", dump_context, "also write the rendered context here");

    // serve
    std::string host = "127.0.0.1";
    int port = 8080;
    CLI::App* serve = app.add_subcommand("serve", "serve /query, /stats and /healthz over HTTP");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port");

    // eval run | eval cost
    CLI::App* eval = app.add_subcommand("eval", "pairwise answer evaluation and cost reports");
    eval->require_subcommand(1);
    std::string questions_file, eval_out_dir = ".";
    std::vector<std::string> answer_files;
    CLI::App* eval_run = eval->add_subcommand("run", "judge two answer files pairwise");
    eval_run->add_option("--questions", questions_file, "questions.jsonl")->required();
    eval_run->add_option("--answers", answer_files, "exactly two answer .jsonl files")
        ->expected(2)
        ->required();
    eval_run->add_option("--out-dir", eval_out_dir, "where winrates.json and judgments.jsonl go");

    std::string usage_file, cost_out = "cost.json";
    long cost_chunks = -1, cost_queries = -1;
    CLI::App* eval_cost = eval->add_subcommand("cost", "per-chunk and per-query cost metrics");
    eval_cost->add_option("--usage", usage_file, "usage.jsonl (default: the engine's own log)");
    eval_cost->add_option("--chunks", cost_chunks, "chunk count (default: from the manifest)");
    eval_cost->add_option("--queries", cost_queries,
                          "query count (default: answer completions in the log)");
    eval_cost->add_option("--out", cost_out, "output file");

    // export graphml
    CLI::App* exp = app.add_subcommand("export", "export artifacts");
    exp->require_subcommand(1);
    std::string graphml_out;
    CLI::App* graphml = exp->add_subcommand("graphml", "write the graph as GraphML");
    graphml->add_option("--out", graphml_out, "output file (default: stdout)");

    // stats
    CLI::App* stats = app.add_subcommand("stats", "print the build manifest and logged usage");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return cmd_build(globals, corpus, no_go);
        if (*query) {
            return cmd_query(globals, question, LayerFlags{!no_el, !no_rl, !no_sl}, dump_context);
        }
        if (*serve) return cmd_serve(globals, host, port);
        if (*eval_run) return cmd_eval_run(globals, questions_file, answer_files, eval_out_dir);
        if (*eval_cost) {
            return cmd_eval_cost(globals, usage_file, cost_chunks, cost_queries, cost_out);
        }
        if (*graphml) return cmd_export_graphml(globals, graphml_out);
        if (*stats) return cmd_stats(globals);
    } catch (const gosu::NoContextError& ex) {
        std::cerr << "no context: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
