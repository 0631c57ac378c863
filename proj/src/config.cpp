#include <algorithm>
#include <fstream>
#include <sstream>

#include "sparselab/harness.hpp"

namespace sparselab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("expected a boolean, got '" + v + "'", line);
}

std::size_t parse_count(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const auto value = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
        throw ParseError("expected a count, got '" + v + "'", line);
    }
}

double parse_real(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const double value = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return value;
    } catch (const std::exception&) {
        throw ParseError("expected a real number, got '" + v + "'", line);
    }
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (backbones.empty()) throw ConfigError("backbones must not be empty");
    if (methods.empty()) throw ConfigError("methods must not be empty");
    if (budgets.empty()) throw ConfigError("budgets must not be empty");
    if (tasks.empty()) throw ConfigError("tasks must not be empty");
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (n_heads < 1) throw ConfigError("n_heads must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (block_size != 16 && block_size != 64 && block_size != 128)
        throw ConfigError("block_size must be one of 16, 64, 128");
    if (window < 1 || window > context_len)
        throw ConfigError("window must lie in 1..context_len");
    if (head_dim < 2) throw ConfigError("head_dim must be >= 2");
    if (signal_gain <= 0.0) throw ConfigError("signal_gain must be positive");
    if (noise_scale < 0.0) throw ConfigError("noise_scale must be nonnegative");
    if (signal_gain <= noise_scale)
        throw ConfigError("signal_gain must exceed noise_scale");
    if (gate_cap <= 0.0 || gate_cap >= 1.0)
        throw ConfigError("gate_cap must lie in (0, 1)");
    if (gate_mode == GateMode::constant &&
        (gate_value <= 0.0 || gate_value > gate_cap))
        throw ConfigError("gate_value must lie in (0, gate_cap]");

    const bool has_blocks =
        std::find(methods.begin(), methods.end(), Method::quest) != methods.end() ||
        std::find(methods.begin(), methods.end(), Method::moba) != methods.end();
    const bool has_snapkv =
        std::find(methods.begin(), methods.end(), Method::snapkv) != methods.end();
    for (const BudgetSpec& b : budgets) {
        if (b.block_size != block_size)
            throw ConfigError("budget block_size disagrees with config block_size");
        if (has_snapkv && b.top_k(context_len) < window)
            throw ConfigError("snapkv retained entries (" +
                              std::to_string(b.top_k(context_len)) +
                              ") must be >= observation window (" +
                              std::to_string(window) + ") for budget " + b.label());
        if (has_blocks) {
            const std::size_t nb = (context_len + block_size - 1) / block_size;
            const std::size_t forced = std::min<std::size_t>(2, nb);
            if (b.top_k(nb) < forced)
                throw ConfigError("block budget " + b.label() + " selects " +
                                  std::to_string(b.top_k(nb)) +
                                  " blocks, fewer than the forced first+local blocks");
        }
    }
}

nlohmann::json ExperimentConfig::canonical_json() const {
    nlohmann::json j;
    std::vector<std::string> names;
    for (auto b : backbones) names.push_back(to_string(b));
    j["backbones"] = names;
    names.clear();
    for (auto m : methods) names.push_back(to_string(m));
    j["methods"] = names;
    names.clear();
    for (const auto& b : budgets) names.push_back(b.label());
    j["budgets"] = names;
    names.clear();
    for (auto t : tasks) names.push_back(to_string(t));
    j["tasks"] = names;
    j["block_size"] = block_size;
    j["window"] = window;
    j["context_len"] = context_len;
    j["n_samples"] = n_samples;
    j["n_heads"] = n_heads;
    j["seeds"] = seeds;
    j["head_dim"] = head_dim;
    j["signal_gain"] = signal_gain;
    j["noise_scale"] = noise_scale;
    j["gate_mode"] = to_string(gate_mode);
    j["gate_value"] = gate_value;
    j["gate_cap"] = gate_cap;
    j["random_uniform"] = random_uniform;
    j["snapkv_max_pool"] = snapkv_max_pool;
    j["capture_hits"] = capture_hits;
    j["h1_include_moba"] = h1_include_moba;
    return j;
}

std::string ExperimentConfig::fingerprint() const {
    // nlohmann objects serialize with sorted keys, so the dump is canonical.
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_json().dump())));
    return buf;
}

ExperimentConfig load_config(const std::string& text) {
    ExperimentConfig cfg;
    cfg.budgets.clear();

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    bool budgets_given = false;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) throw ParseError("missing value for '" + key + "'", line_no);

        try {
            if (key == "backbones") {
                cfg.backbones.clear();
                if (value == "both") {
                    cfg.backbones = {BackboneKind::standard, BackboneKind::memory_augmented};
                } else {
                    for (const auto& item : split_list(value))
                        cfg.backbones.push_back(backbone_from_string(item));
                }
            } else if (key == "methods") {
                cfg.methods.clear();
                for (const auto& item : split_list(value))
                    cfg.methods.push_back(method_from_string(item));
            } else if (key == "budgets") {
                cfg.budgets.clear();
                for (const auto& item : split_list(value))
                    cfg.budgets.push_back(parse_budget(item));
                budgets_given = true;
            } else if (key == "tasks") {
                cfg.tasks.clear();
                if (value == "all") {
                    cfg.tasks = all_tasks();
                } else {
                    for (const auto& item : split_list(value))
                        cfg.tasks.push_back(task_from_string(item));
                }
            } else if (key == "block_size") {
                cfg.block_size = parse_count(value, line_no);
            } else if (key == "window") {
                cfg.window = parse_count(value, line_no);
            } else if (key == "context_len") {
                cfg.context_len = parse_count(value, line_no);
            } else if (key == "n_samples") {
                cfg.n_samples = parse_count(value, line_no);
            } else if (key == "n_heads") {
                cfg.n_heads = parse_count(value, line_no);
            } else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& item : split_list(value))
                    cfg.seeds.push_back(parse_count(item, line_no));
            } else if (key == "head_dim") {
                cfg.head_dim = parse_count(value, line_no);
            } else if (key == "signal_gain") {
                cfg.signal_gain = parse_real(value, line_no);
            } else if (key == "noise_scale") {
                cfg.noise_scale = parse_real(value, line_no);
            } else if (key == "gate_mode") {
                cfg.gate_mode = gate_mode_from_string(value);
            } else if (key == "gate_value") {
                cfg.gate_value = parse_real(value, line_no);
            } else if (key == "gate_cap") {
                cfg.gate_cap = parse_real(value, line_no);
            } else if (key == "random_uniform") {
                cfg.random_uniform = parse_bool(value, line_no);
            } else if (key == "snapkv_max_pool") {
                cfg.snapkv_max_pool = parse_bool(value, line_no);
            } else if (key == "capture_hits") {
                cfg.capture_hits = parse_bool(value, line_no);
            } else if (key == "h1_include_moba") {
                cfg.h1_include_moba = parse_bool(value, line_no);
            } else {
                throw ParseError("unknown key '" + key + "'", line_no);
            }
        } catch (const ParseError&) {
            throw;
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), line_no);
        }
    }

    if (!budgets_given)
        for (const char* b : {"1/4", "1/8", "1/16"})
            cfg.budgets.push_back(parse_budget(b));
    for (auto& b : cfg.budgets) b.block_size = cfg.block_size;

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str());
}

}  // namespace sparselab
