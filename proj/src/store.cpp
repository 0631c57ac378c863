#include <fstream>

#include "sparselab/harness.hpp"

namespace sparselab {

std::string RunResult::cell_key() const {
    return fingerprint + "|" + to_string(backbone) + "|" + to_string(method) + "|" +
           budget.label() + "|" + to_string(task) + "|" + std::to_string(seed);
}

nlohmann::json RunResult::to_json() const {
    nlohmann::json j;
    j["fingerprint"] = fingerprint;
    j["backbone"] = to_string(backbone);
    j["method"] = to_string(method);
    j["budget"] = budget.label();
    j["block_size"] = budget.block_size;
    j["task"] = to_string(task);
    j["seed"] = seed;
    j["top_k"] = top_k;
    j["n_samples"] = n_samples;
    j["accuracy"] = accuracy;
    if (!head_hit_rates.empty()) j["head_hit_rates"] = head_hit_rates;
    j["wall_ms"] = wall_ms;
    return j;
}

RunResult RunResult::from_json(const nlohmann::json& j) {
    RunResult r;
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.backbone = backbone_from_string(j.at("backbone").get<std::string>());
    r.method = method_from_string(j.at("method").get<std::string>());
    r.budget = parse_budget(j.at("budget").get<std::string>());
    r.budget.block_size = j.at("block_size").get<std::size_t>();
    r.task = task_from_string(j.at("task").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.top_k = j.at("top_k").get<std::size_t>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    if (j.contains("head_hit_rates"))
        r.head_hit_rates = j.at("head_hit_rates").get<std::vector<double>>();
    r.wall_ms = j.at("wall_ms").get<double>();
    return r;
}

ResultStore::ResultStore(std::filesystem::path file) : file_(std::move(file)) {
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        keys_.insert(RunResult::from_json(nlohmann::json::parse(line)).cell_key());
    }
}

void ResultStore::append(const RunResult& r) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(file_, std::ios::app);
    if (!out) throw ConfigError("cannot append to result store: " + file_.string());
    out << r.to_json().dump() << '\n';
    out.flush();
    keys_.insert(r.cell_key());
}

std::vector<RunResult> ResultStore::load() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<RunResult> out;
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(RunResult::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

bool ResultStore::has(const std::string& cell_key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return keys_.count(cell_key) > 0;
}

}  // namespace sparselab
