// gosu-fixgen — materializes the bundled demo: a three-document corpus, the
// complete scripted-provider fixture set for it, a ready-to-use config file,
// and a small pairwise-evaluation example. After running it:
//
//   gosu --config <work>/config.toml build --corpus <work>/corpus
//   gosu --config <work>/config.toml query "How do ACE inhibitors lower blood pressure?"

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "gosu/testing/demo.hpp"
#include "gosu/util.hpp"

namespace {

constexpr const char* kConfigTemplate = R"(# demo engine configuration (paths are relative to this file)
data_dir = "data"

[optimizer]
sim_tau = 0.3

[provider]
mode = "scripted"
fixtures_dir = "fixtures"
embed_dim = 64
embed_seed = 17
)";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gosu-fixgen — generate the offline demo corpus and fixtures"};
    std::string work = "demo";
    app.add_option("--work", work, "directory to populate (default: demo)");
    CLI11_PARSE(app, argc, argv);

    try {
        const std::filesystem::path work_dir(work);
        const gosu::EngineConfig config = gosu::testing::demo_config(work_dir);
        const std::filesystem::path scratch = work_dir / ".fixgen-scratch";

        const int written =
            gosu::testing::generate_demo_fixtures(config, work_dir / "corpus", scratch);
        gosu::testing::write_demo_eval_files(work_dir / "eval", config.provider.fixtures_dir);
        gosu::write_text_file(work_dir / "config.toml", kConfigTemplate);
        std::filesystem::remove_all(scratch);

        std::cout << "wrote " << written << " pipeline fixtures under "
                  << config.provider.fixtures_dir.string() << "\n"
                  << "corpus:  " << (work_dir / "corpus").string() << "\n"
                  << "eval:    " << (work_dir / "eval").string() << "\n"
                  << "config:  " << (work_dir / "config.toml").string() << "\n";
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
