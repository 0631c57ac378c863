#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "sparselab/eval.hpp"

using namespace sparselab;
namespace fs = std::filesystem;

namespace {

std::string desk_text(const std::string& extra = "") {
    return "backbones = both\n"
           "methods = quest,moba,snapkv\n"
           "budgets = 1/4,1/8,1/16\n"
           "block_size = 16\n"
           "window = 16\n"
           "tasks = all\n"
           "context_len = 512\n"
           "n_samples = 2\n"
           "n_heads = 1\n"
           "seeds = 7\n" +
           extra;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sparselab_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("load_config fills documented defaults") {
    const ExperimentConfig cfg = load_config("context_len = 4096\nn_samples = 5\n");
    CHECK(cfg.block_size == 64);
    CHECK(cfg.window == 64);
    CHECK(cfg.budgets.size() == 3);
    CHECK(cfg.budgets[0].label() == "1/4");
    CHECK(cfg.tasks.size() == 8);
    CHECK(cfg.backbones.size() == 2);

    // appendix mapping: context 4096, block 64, 1/8 -> 8 blocks
    CHECK(resolved_top_k(cfg, Method::quest, cfg.budgets[1]) == 8);
    CHECK(resolved_top_k(cfg, Method::snapkv, cfg.budgets[1]) == 512);
}

TEST_CASE("load_config rejects violated invariants by name") {
    // snapkv at 1/16 of 512 keeps 32 < window 64
    CHECK_THROWS_WITH_AS(
        (void)load_config("context_len = 512\nmethods = snapkv\nbudgets = 1/16\n"),
        doctest::Contains("observation window"), ConfigError);

    CHECK_THROWS_AS((void)load_config("block_size = 32\n"), ConfigError);
    CHECK_THROWS_AS((void)load_config("n_samples = 0\n"), ConfigError);
    CHECK_THROWS_AS((void)load_config("noise_scale = 11\n"), ConfigError);
}

TEST_CASE("load_config parse errors carry line numbers") {
    try {
        (void)load_config("context_len = 512\nnot_a_key = 3\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS((void)load_config("context_len\n"), ParseError);
    CHECK_THROWS_AS((void)load_config("n_samples = soon\n"), ParseError);
    CHECK_THROWS_AS((void)load_config("n_samples = 12abc\n"), ParseError);
    CHECK_THROWS_AS((void)load_config("noise_scale = 0.5x\n"), ParseError);
}

TEST_CASE("fingerprint is stable under key reordering and sensitive to fields") {
    const ExperimentConfig a = load_config("context_len = 512\nblock_size = 16\nwindow = 16\n");
    const ExperimentConfig b = load_config("window = 16\nblock_size = 16\ncontext_len = 512\n");
    CHECK(a.fingerprint() == b.fingerprint());

    const ExperimentConfig c = load_config("context_len = 512\nblock_size = 16\nwindow = 8\n");
    CHECK(a.fingerprint() != c.fingerprint());
    const ExperimentConfig d = load_config(desk_text());
    const ExperimentConfig e = load_config(desk_text("noise_scale = 0.25\n"));
    CHECK(d.fingerprint() != e.fingerprint());
}

TEST_CASE("run_grid covers the full grid and replays bit-identically") {
    const ExperimentConfig cfg = load_config(desk_text());
    const fs::path dir = fresh_dir("replay");

    ResultStore store_a(dir / "a.jsonl");
    const auto run_a = run_grid(cfg, store_a);
    CHECK(run_a.size() == 2 * 3 * 3 * 8);  // backbones x methods x budgets x tasks

    ResultStore store_b(dir / "b.jsonl");
    const auto run_b = run_grid(cfg, store_b);
    REQUIRE(run_b.size() == run_a.size());
    for (std::size_t i = 0; i < run_a.size(); ++i) {
        CHECK(run_a[i].cell_key() == run_b[i].cell_key());
        CHECK(run_a[i].accuracy == run_b[i].accuracy);
    }

    emit_report(run_a, "table", dir / "rep_a");
    emit_report(run_b, "table", dir / "rep_b");
    CHECK(slurp(dir / "rep_a" / "accuracy.tsv") == slurp(dir / "rep_b" / "accuracy.tsv"));
}

TEST_CASE("run_grid agrees with the unshared reference scorer") {
    ExperimentConfig cfg = load_config(desk_text());
    cfg.tasks = {TaskVariant::MK1};
    cfg.methods = {Method::quest, Method::snapkv};
    const fs::path dir = fresh_dir("reference");
    ResultStore store(dir / "r.jsonl");
    const auto results = run_grid(cfg, store);

    for (const RunResult& r : results) {
        const auto samples =
            generate_split(r.task, cfg.n_samples, cfg.context_len,
                           sample_master_seed(r.seed, r.task));
        double em = 0.0;
        for (const auto& s : samples)
            em += score_sample(s, cfg, r.backbone, r.method, r.budget, r.seed, false).em;
        CHECK(r.accuracy == 100.0 * em / static_cast<double>(cfg.n_samples));
    }
}

TEST_CASE("at budget fraction 1 every method reproduces dense attention accuracy") {
    ExperimentConfig cfg = load_config(desk_text("budgets = 1\n"));
    cfg.methods = {Method::quest, Method::moba, Method::snapkv, Method::random_tokens};
    cfg.tasks = {TaskVariant::S1, TaskVariant::MV};
    cfg.n_samples = 8;
    const fs::path dir = fresh_dir("fullbudget");
    ResultStore store(dir / "r.jsonl");
    const auto results = run_grid(cfg, store);

    for (const RunResult& a : results)
        for (const RunResult& b : results)
            if (a.backbone == b.backbone && a.task == b.task)
                CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("interrupted runs resume to the identical report") {
    const ExperimentConfig cfg = load_config(desk_text());
    const fs::path dir = fresh_dir("resume");

    ResultStore store_full(dir / "full.jsonl");
    const auto full = run_grid(cfg, store_full);

    ResultStore store_part(dir / "part.jsonl");
    GridOptions part_opts;
    part_opts.cell_limit = 61;  // interrupt mid-grid
    const auto partial = run_grid(cfg, store_part, part_opts);
    CHECK(partial.size() == 61);

    ResultStore store_resumed(dir / "part.jsonl");
    GridOptions resume_opts;
    resume_opts.resume = true;
    const auto resumed = run_grid(cfg, store_resumed, resume_opts);
    REQUIRE(resumed.size() == full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(resumed[i].cell_key() == full[i].cell_key());
        CHECK(resumed[i].accuracy == full[i].accuracy);
    }

    emit_report(full, "table", dir / "rep_full");
    emit_report(resumed, "table", dir / "rep_resumed");
    CHECK(slurp(dir / "rep_full" / "accuracy.tsv") ==
          slurp(dir / "rep_resumed" / "accuracy.tsv"));
}

TEST_CASE("parallel workers produce the same results as serial execution") {
    const ExperimentConfig cfg = load_config(desk_text());
    const fs::path dir = fresh_dir("workers");

    ResultStore serial(dir / "serial.jsonl");
    const auto a = run_grid(cfg, serial);
    ResultStore threaded(dir / "threaded.jsonl");
    GridOptions opts;
    opts.workers = 4;
    const auto b = run_grid(cfg, threaded, opts);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].cell_key() == b[i].cell_key());
        CHECK(a[i].accuracy == b[i].accuracy);
    }
}

TEST_CASE("worker count env override") {
    unsetenv("SPARSELAB_WORKERS");
    CHECK(env_worker_override(3) == 3);
    setenv("SPARSELAB_WORKERS", "5", 1);
    CHECK(env_worker_override(3) == 5);
    setenv("SPARSELAB_WORKERS", "bogus", 1);
    CHECK(env_worker_override(3) == 3);
    unsetenv("SPARSELAB_WORKERS");
}

TEST_CASE("run result records round-trip through the store") {
    ExperimentConfig cfg = load_config(desk_text());
    cfg.tasks = {TaskVariant::S1, TaskVariant::MV};
    cfg.capture_hits = true;
    const fs::path dir = fresh_dir("roundtrip");
    ResultStore store(dir / "r.jsonl");
    const auto results = run_grid(cfg, store);

    const auto loaded = ResultStore(dir / "r.jsonl").load();
    REQUIRE(loaded.size() == results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(loaded[i].cell_key() == results[i].cell_key());
        CHECK(loaded[i].accuracy == results[i].accuracy);
        CHECK(loaded[i].head_hit_rates == results[i].head_hit_rates);
        CHECK(loaded[i].to_json() == results[i].to_json());
    }
}

TEST_CASE("reports render single rows and seeded mean ± std cells") {
    ExperimentConfig cfg = load_config(desk_text());
    cfg.tasks = {TaskVariant::S1};
    cfg.methods = {Method::quest};
    cfg.backbones = {BackboneKind::standard};
    cfg.budgets = {parse_budget("1/4")};
    for (auto& b : cfg.budgets) b.block_size = cfg.block_size;

    const fs::path dir = fresh_dir("report");
    ResultStore store(dir / "r.jsonl");
    const auto one = run_grid(cfg, store);
    REQUIRE(one.size() == 1);
    emit_report(one, "table", dir / "single");
    const std::string table = slurp(dir / "single" / "accuracy.tsv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);  // header + one row

    cfg.seeds = {1, 2, 3, 4, 5};
    ResultStore store5(dir / "r5.jsonl");
    const auto five = run_grid(cfg, store5);
    emit_report(five, "table", dir / "five");
    const std::string table5 = slurp(dir / "five" / "accuracy.tsv");
    CHECK(table5.find("±") != std::string::npos);

    emit_report(five, "plot_data", dir / "plots");
    CHECK(fs::exists(dir / "plots" / "fig_accuracy_vs_budget.jsonl"));
    CHECK(fs::exists(dir / "plots" / "metadata.json"));
    CHECK_THROWS_AS(emit_report(five, "csv?", dir), ConfigError);
    CHECK_THROWS_AS(emit_report({}, "table", dir), ConfigError);
}

TEST_CASE("snapkv selections are immutable across decoding steps") {
    ExperimentConfig cfg = load_config(desk_text());
    const NiahSample s = generate_sample(TaskVariant::MV, 512, 4);  // 4 answer steps
    const HeadEvalState head = build_head_eval_state(
        s, cfg, BackboneKind::memory_augmented, planted_head_seed(7, s.seed, 0));
    const auto sel = make_selections(head, Method::snapkv, cfg.budgets[0], cfg, 9, false);
    REQUIRE(sel.size() == s.answer_steps());
    for (std::size_t t = 1; t < sel.size(); ++t) CHECK(sel[t] == sel[0]);
    // quest reselects per step from the same forced baseline
    const auto quest_sel = make_selections(head, Method::quest, cfg.budgets[2], cfg, 9, false);
    for (const auto& c : quest_sel) {
        CHECK(c.contains(0));
        CHECK(c.contains((512 - 1) / cfg.block_size));
    }
}

TEST_CASE("capacity errors identify the offending grid cell") {
    ExperimentConfig cfg = load_config(desk_text());
    cfg.context_len = 256;  // too small for MK3's 32 pairs
    cfg.budgets = {parse_budget("1/4")};
    for (auto& b : cfg.budgets) b.block_size = cfg.block_size;
    cfg.tasks = {TaskVariant::MK3};
    const fs::path dir = fresh_dir("capacity");
    ResultStore store(dir / "r.jsonl");
    CHECK_THROWS_WITH_AS(run_grid(cfg, store), doctest::Contains("MK3"), CapacityError);
}

TEST_CASE("capture_hits records per-head hit rates for quest but not moba by default") {
    ExperimentConfig cfg = load_config(desk_text("capture_hits = true\n"));
    cfg.tasks = {TaskVariant::S1};
    cfg.n_heads = 2;
    const fs::path dir = fresh_dir("hits");
    ResultStore store(dir / "r.jsonl");
    const auto results = run_grid(cfg, store);
    for (const RunResult& r : results) {
        if (r.method == Method::moba)
            CHECK(r.head_hit_rates.empty());
        else
            CHECK(r.head_hit_rates.size() == 2);
    }
}
