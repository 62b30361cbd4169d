#include "gosu/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>
#include <stdexcept>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"
#include "json.hpp"

namespace gosu {

using nlohmann::json;

// ============================================================================
// Validation
// ============================================================================

void ProviderSettings::validate() const {
    if (mode != "scripted" && mode != "live") {
        throw ConfigError("provider.mode must be \"scripted\" or \"live\", got \"" + mode + "\"");
    }
    if (embed_dim <= 0) throw ConfigError("provider.embed_dim must be positive");
    if (parallelism < 1) throw ConfigError("provider.parallelism must be at least 1");
    if (max_retries < 0) throw ConfigError("provider.max_retries must be non-negative");
    if (timeout_seconds <= 0) throw ConfigError("provider.timeout_seconds must be positive");
    if (price_prompt < 0 || price_completion < 0 || price_embedding < 0) {
        throw ConfigError("provider prices must be non-negative");
    }
}

void EngineConfig::validate() const {
    chunking.validate();
    optimizer.validate();
    budgets.validate();
    if (context_token_budget < 0) throw ConfigError("generation.context_token_budget must be non-negative");
    provider.validate();
}

// ============================================================================
// Canonical JSON + hash
// ============================================================================

std::string config_to_json(const EngineConfig& config) {
    json doc;
    doc["chunking"]["window_tokens"] = config.chunking.window_tokens;
    doc["chunking"]["overlap_tokens"] = config.chunking.overlap_tokens;
    doc["optimizer"]["enabled"] = config.optimizer.enabled;
    doc["optimizer"]["sim_tau"] = config.optimizer.sim_tau;
    doc["optimizer"]["evidence_budget"] = config.optimizer.evidence_budget;
    doc["optimizer"]["max_rounds"] = config.optimizer.max_rounds;
    doc["budgets"]["top_k_match"] = config.budgets.top_k_match;
    doc["budgets"]["su_sufficiency"] = config.budgets.su_sufficiency;
    doc["budgets"]["graph_budget"] = config.budgets.graph_budget;
    doc["budgets"]["chunk_budget"] = config.budgets.chunk_budget;
    doc["layers"]["entity"] = config.layers.entity_layer;
    doc["layers"]["relation"] = config.layers.relation_layer;
    doc["layers"]["semantic"] = config.layers.su_layer;
    doc["generation"]["context_token_budget"] = config.context_token_budget;
    // Only knobs that shape engine outputs belong here. Execution and
    // transport settings (parallelism, retries, timeouts, key env) are
    // excluded on purpose: the same engine must hash the same however fast
    // or slow it was built.
    json& provider = doc["provider"];
    provider["mode"] = config.provider.mode;
    provider["embed_dim"] = config.provider.embed_dim;
    provider["embed_seed"] = config.provider.embed_seed;
    provider["endpoint"] = config.provider.endpoint;
    provider["model"] = config.provider.model;
    provider["embed_model"] = config.provider.embed_model;
    provider["price_prompt"] = config.provider.price_prompt;
    provider["price_completion"] = config.provider.price_completion;
    provider["price_embedding"] = config.provider.price_embedding;
    return doc.dump();
}

std::string config_hash(const EngineConfig& config) {
    return sha256_hex(config_to_json(config));
}

// ============================================================================
// TOML-like parser
// ============================================================================

namespace {

// Removes a trailing comment, respecting double quotes.
std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

[[noreturn]] void fail(int line_no, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

std::string parse_string(const std::string& raw, int line_no) {
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
        fail(line_no, "expected a double-quoted string, got `" + raw + "`");
    }
    return raw.substr(1, raw.size() - 2);
}

bool parse_bool(const std::string& raw, int line_no) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    fail(line_no, "expected true or false, got `" + raw + "`");
}

long parse_long(const std::string& raw, int line_no) {
    try {
        size_t used = 0;
        long value = std::stol(raw, &used);
        if (used == raw.size()) return value;
    } catch (const std::exception&) {
    }
    fail(line_no, "expected an integer, got `" + raw + "`");
}

double parse_double(const std::string& raw, int line_no) {
    try {
        size_t used = 0;
        double value = std::stod(raw, &used);
        if (used == raw.size()) return value;
    } catch (const std::exception&) {
    }
    fail(line_no, "expected a number, got `" + raw + "`");
}

// One setter per known key; unknown keys are hard errors.
using Setter = std::function<void(EngineConfig&, const std::string& raw, int line_no)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"data_dir", [](EngineConfig& c, const std::string& v, int n) { c.data_dir = parse_string(v, n); }},
        {"chunking.window_tokens", [](EngineConfig& c, const std::string& v, int n) { c.chunking.window_tokens = parse_long(v, n); }},
        {"chunking.overlap_tokens", [](EngineConfig& c, const std::string& v, int n) { c.chunking.overlap_tokens = parse_long(v, n); }},
        {"optimizer.enabled", [](EngineConfig& c, const std::string& v, int n) { c.optimizer.enabled = parse_bool(v, n); }},
        {"optimizer.sim_tau", [](EngineConfig& c, const std::string& v, int n) { c.optimizer.sim_tau = parse_double(v, n); }},
        {"optimizer.evidence_budget", [](EngineConfig& c, const std::string& v, int n) { c.optimizer.evidence_budget = parse_long(v, n); }},
        {"optimizer.max_rounds", [](EngineConfig& c, const std::string& v, int n) { c.optimizer.max_rounds = parse_long(v, n); }},
        {"budgets.top_k_match", [](EngineConfig& c, const std::string& v, int n) { c.budgets.top_k_match = parse_long(v, n); }},
        {"budgets.su_sufficiency", [](EngineConfig& c, const std::string& v, int n) { c.budgets.su_sufficiency = parse_long(v, n); }},
        {"budgets.graph_budget", [](EngineConfig& c, const std::string& v, int n) { c.budgets.graph_budget = parse_long(v, n); }},
        {"budgets.chunk_budget", [](EngineConfig& c, const std::string& v, int n) { c.budgets.chunk_budget = parse_long(v, n); }},
        {"layers.entity", [](EngineConfig& c, const std::string& v, int n) { c.layers.entity_layer = parse_bool(v, n); }},
        {"layers.relation", [](EngineConfig& c, const std::string& v, int n) { c.layers.relation_layer = parse_bool(v, n); }},
        {"layers.semantic", [](EngineConfig& c, const std::string& v, int n) { c.layers.su_layer = parse_bool(v, n); }},
        {"generation.context_token_budget", [](EngineConfig& c, const std::string& v, int n) { c.context_token_budget = parse_long(v, n); }},
        {"provider.mode", [](EngineConfig& c, const std::string& v, int n) { c.provider.mode = parse_string(v, n); }},
        {"provider.fixtures_dir", [](EngineConfig& c, const std::string& v, int n) { c.provider.fixtures_dir = parse_string(v, n); }},
        {"provider.embed_dim", [](EngineConfig& c, const std::string& v, int n) { c.provider.embed_dim = static_cast<int>(parse_long(v, n)); }},
        {"provider.embed_seed", [](EngineConfig& c, const std::string& v, int n) { c.provider.embed_seed = static_cast<std::uint64_t>(parse_long(v, n)); }},
        {"provider.endpoint", [](EngineConfig& c, const std::string& v, int n) { c.provider.endpoint = parse_string(v, n); }},
        {"provider.model", [](EngineConfig& c, const std::string& v, int n) { c.provider.model = parse_string(v, n); }},
        {"provider.embed_model", [](EngineConfig& c, const std::string& v, int n) { c.provider.embed_model = parse_string(v, n); }},
        {"provider.api_key_env", [](EngineConfig& c, const std::string& v, int n) { c.provider.api_key_env = parse_string(v, n); }},
        {"provider.max_retries", [](EngineConfig& c, const std::string& v, int n) { c.provider.max_retries = static_cast<int>(parse_long(v, n)); }},
        {"provider.timeout_seconds", [](EngineConfig& c, const std::string& v, int n) { c.provider.timeout_seconds = static_cast<int>(parse_long(v, n)); }},
        {"provider.price_prompt", [](EngineConfig& c, const std::string& v, int n) { c.provider.price_prompt = parse_double(v, n); }},
        {"provider.price_completion", [](EngineConfig& c, const std::string& v, int n) { c.provider.price_completion = parse_double(v, n); }},
        {"provider.price_embedding", [](EngineConfig& c, const std::string& v, int n) { c.provider.price_embedding = parse_double(v, n); }},
        {"provider.parallelism", [](EngineConfig& c, const std::string& v, int n) { c.provider.parallelism = static_cast<int>(parse_long(v, n)); }},
    };
    return table;
}

}  // namespace

EngineConfig parse_config_text(const std::string& text) {
    EngineConfig config;
    std::string section;
    int line_no = 0;
    for (const std::string& raw_line : split(text, "\n")) {
        ++line_no;
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(line_no, "empty section name");
            continue;
        }

        const size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_no, "empty key");
        if (value.empty()) fail(line_no, "empty value for key `" + key + "`");

        const std::string full_key = section.empty() ? key : section + "." + key;
        auto it = setters().find(full_key);
        if (it == setters().end()) fail(line_no, "unknown key `" + full_key + "`");
        it->second(config, value, line_no);
    }
    config.validate();
    return config;
}

EngineConfig load_config(const std::filesystem::path& file) {
    std::string text;
    try {
        text = read_text_file(file);
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what());
    }
    EngineConfig config = parse_config_text(text);
    // Relative paths in the file resolve against the file's directory.
    const auto base = file.parent_path();
    if (config.data_dir.is_relative()) config.data_dir = base / config.data_dir;
    if (config.provider.fixtures_dir.is_relative()) {
        config.provider.fixtures_dir = base / config.provider.fixtures_dir;
    }
    return config;
}

// ============================================================================
// Factories
// ============================================================================

std::unique_ptr<Backend> make_backend(const ProviderSettings& settings) {
    settings.validate();
    if (settings.mode == "scripted") {
        return std::make_unique<ScriptedBackend>(settings.fixtures_dir, settings.embed_seed,
                                                 settings.embed_dim);
    }
    LiveBackendConfig live;
    live.endpoint = settings.endpoint;
    live.model = settings.model;
    live.embed_model = settings.embed_model;
    live.api_key_env = settings.api_key_env;
    live.dimension = settings.embed_dim;
    live.max_retries = settings.max_retries;
    live.timeout_seconds = settings.timeout_seconds;
    return std::make_unique<LiveBackend>(live);
}

std::unique_ptr<Provider> make_provider(const ProviderSettings& settings) {
    return std::make_unique<Provider>(make_backend(settings), settings.prices(),
                                      settings.parallelism);
}

}  // namespace gosu
