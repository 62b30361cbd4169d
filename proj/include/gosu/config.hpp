#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "gosu/corpus.hpp"
#include "gosu/provider.hpp"
#include "gosu/retrieval.hpp"
#include "gosu/semantic_units.hpp"

namespace gosu {

// Where model calls go and what they cost. `mode` selects the backend:
// "scripted" replays fixtures from fixtures_dir, "live" speaks an
// OpenAI-compatible HTTP API at `endpoint`.
struct ProviderSettings {
    std::string mode = "scripted";
    std::filesystem::path fixtures_dir = "fixtures";
    int embed_dim = 64;          // scripted embedding width; live embedding width
    std::uint64_t embed_seed = 17;

    std::string endpoint = "http://localhost:8000/v1";
    std::string model = "gpt-4o-mini";
    std::string embed_model = "bge-m3";
    std::string api_key_env = "GOSU_API_KEY";
    int max_retries = 3;
    int timeout_seconds = 120;

    double price_prompt = 0.0;      // USD per prompt token
    double price_completion = 0.0;  // USD per completion token
    double price_embedding = 0.0;   // USD per embedding token
    int parallelism = 4;

    PriceTable prices() const noexcept {
        return PriceTable{price_prompt, price_completion, price_embedding};
    }
    void validate() const;  // throws ConfigError
};

// Full engine configuration. Every default is overridable from the config
// file; the CLI layer additionally honors GOSU_DATA_DIR and the ablation
// flags.
struct EngineConfig {
    std::filesystem::path data_dir = "data";
    ChunkingConfig chunking;
    OptimizerConfig optimizer;
    Budgets budgets;
    LayerFlags layers;
    long context_token_budget = 6000;
    ProviderSettings provider;

    void validate() const;  // throws ConfigError
};

// Canonical JSON rendering of a config (sorted keys, stable number
// formatting). Pure-location fields (data_dir, fixtures_dir) and execution
// knobs (parallelism, retries, timeouts, key env) are excluded so the hash
// below identifies engine semantics: what gets built, not where or how fast.
std::string config_to_json(const EngineConfig& config);

// SHA-256 of config_to_json; stamped into the build manifest.
std::string config_hash(const EngineConfig& config);

// Parses the TOML-like config grammar:
//   - `key = value` pairs, grouped under `[section]` headers
//   - values: "quoted strings", true/false, integers, floats
//   - `#` starts a comment (full-line or trailing)
// Unknown sections or keys are errors, not warnings — a typo must never
// silently fall back to a default.
EngineConfig parse_config_text(const std::string& text);

EngineConfig load_config(const std::filesystem::path& file);

// Backend/provider factories driven by ProviderSettings.
std::unique_ptr<Backend> make_backend(const ProviderSettings& settings);
std::unique_ptr<Provider> make_provider(const ProviderSettings& settings);

}  // namespace gosu
