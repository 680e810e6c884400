#include "stamina/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace stamina;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig tiny_config(const std::string& out_dir, const std::string& methods) {
    std::map<std::string, std::string> keys = {
        {"mode", "denoiser"}, {"n_tasks", "2"},         {"steps", "5"},
        {"seed", "5"},        {"methods", methods},     {"pretrain_steps", "0"},
        {"out", out_dir},     {"eval_samples", "8"},
    };
    return config_from_keys(keys);
}

}  // namespace

TEST_CASE("config text parsing follows the key = value grammar") {
    auto keys = parse_config_text(
        "# a comment\n"
        "mode = denoiser\n"
        "\n"
        "  n_tasks =  3   # trailing comment\n"
        "out = runs/exp1\n");
    CHECK(keys.at("mode") == "denoiser");
    CHECK(keys.at("n_tasks") == "3");
    CHECK(keys.at("out") == "runs/exp1");
    CHECK_THROWS_AS(parse_config_text("not-a-pair\n"), ConfigError);
}

TEST_CASE("config keys populate the experiment and method grid") {
    std::map<std::string, std::string> keys = {
        {"mode", "classifier"},    {"n_tasks", "5"},       {"steps", "9"},
        {"seed", "17"},            {"methods", "stamina,naive"},
        {"rank", "2"},             {"tau", "0.25"},        {"lambda_f", "10"},
        {"lambda_s", "0.5"},       {"pretrain_steps", "3"},
    };
    ExperimentConfig c = config_from_keys(keys);
    CHECK(c.mode == Mode::classifier);
    CHECK(c.n_tasks == 5);
    CHECK(c.steps == 9);
    CHECK(c.seed == 17);
    REQUIRE(c.grid.size() == 2);
    CHECK(c.grid[0].method == Method::stamina);
    CHECK(c.grid[0].rank == 2);
    CHECK(c.grid[0].tau == 0.25);
    CHECK(c.grid[0].weights.lambda_f == 10.0);
    CHECK(c.grid[0].weights.lambda_s == 0.5);
    CHECK(c.grid[0].pretrain_steps == 3);
    CHECK(c.grid[1].method == Method::naive);
    // every grid entry shares the experiment seed
    CHECK(c.grid[0].seed == 17);
    CHECK(c.grid[1].seed == 17);
}

TEST_CASE("concept generation is seeded and separable") {
    Embedder e = Embedder::make_identity();
    ConceptGenerator gen;
    gen.seed = 90;
    GeneratedTasks one = generate_concepts(gen, 1, e, 10, 16);
    CHECK(one.specs.size() == 1);
    CHECK(one.specs[0].task_id == 1);

    GeneratedTasks a = generate_concepts(gen, 3, e, 10, 16);
    GeneratedTasks b = generate_concepts(gen, 3, e, 10, 16);
    for (int j = 0; j < 3; ++j)
        CHECK((a.batches[j].train - b.batches[j].train).cwiseAbs().maxCoeff() == 0.0);

    // concepts are far apart relative to within-concept spread
    const Mat& x = a.dataset_embeds[0];
    const Mat& y = a.dataset_embeds[1];
    long h = x.rows() / 2;
    double within = mmd2(x.topRows(h), x.bottomRows(x.rows() - h));
    double between = mmd2(x, y);
    CHECK(between > 10.0 * std::abs(within));

    ConceptGenerator bad = gen;
    bad.noise_scale = 0.0;
    CHECK_THROWS_AS(generate_concepts(bad, 1, e, 10, 16), ConfigError);
    CHECK_THROWS_AS(generate_concepts(gen, 0, e, 10, 16), ConfigError);
}

TEST_CASE("ablation grid expands the five single ablations") {
    MethodConfig base = MethodConfig::defaults(Method::stamina);
    std::vector<MethodConfig> grid = ablation_grid(base);
    REQUIRE(grid.size() == 6);
    CHECK(!grid[0].ablations.any());
    int mask = 0, token = 0, mask_mlp = 0, sigmoid = 0, sparsity = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        mask += grid[i].ablations.no_mask;
        token += grid[i].ablations.no_token_mlp;
        mask_mlp += grid[i].ablations.no_mask_mlp;
        sigmoid += grid[i].ablations.sigmoid_instead_of_gumbel;
        sparsity += grid[i].ablations.no_sparsity;
    }
    CHECK(mask == 1);
    CHECK(token == 1);
    CHECK(mask_mlp == 1);
    CHECK(sigmoid == 1);
    CHECK(sparsity == 1);
    CHECK_THROWS_AS(ablation_grid(MethodConfig::defaults(Method::clora)), ConfigError);
}

TEST_CASE("config hash is stable and field-sensitive") {
    ExperimentConfig a = tiny_config("outa", "stamina");
    ExperimentConfig b = tiny_config("outa", "stamina");
    CHECK(a.hash() == b.hash());
    b.seed += 1;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("run_experiment writes a complete, reproducible report") {
    fs::path dir = fs::temp_directory_path() / "stamina_harness_test";
    fs::remove_all(dir);
    ExperimentConfig cfg = tiny_config((dir / "run1").string(), "stamina,naive");
    std::vector<RunReport> reports = run_experiment(cfg);
    REQUIRE(reports.size() == 2);
    for (const auto& r : reports) {
        CHECK(r.interference.size() == 2);
        CHECK(r.weight_distance.size() == 2);
        CHECK(r.plasticity_per_task.size() == 2);
        fs::path rd = dir / "run1" / r.run_id;
        for (const char* f : {"report.json", "report.txt", "series_interference.csv",
                              "series_weight_distance.csv", "series_plasticity.csv",
                              "continual_log.json"})
            CHECK(fs::exists(rd / f));
        CHECK(fs::exists(rd / "checkpoints" / "task_1.json"));
        CHECK(fs::exists(rd / "checkpoints" / "task_2.json"));
    }

    // a second execution is byte-identical
    ExperimentConfig cfg2 = tiny_config((dir / "run2").string(), "stamina,naive");
    run_experiment(cfg2);
    for (const char* id : {"stamina", "naive"})
        CHECK(read_file(dir / "run1" / id / "report.json") ==
              read_file(dir / "run2" / id / "report.json"));

    // metrics recomputed from the saved log agree with the report
    RunReport rec = recompute_metrics((dir / "run1" / "stamina").string());
    CHECK(rec.a == reports[0].a);
    CHECK(rec.f == reports[0].f);
    CHECK(rec.p == reports[0].p);
    fs::remove_all(dir);
}

TEST_CASE("resume continues from the last checkpoint") {
    fs::path dir = fs::temp_directory_path() / "stamina_resume_test";
    fs::remove_all(dir);
    ExperimentConfig cfg = tiny_config((dir / "out").string(), "stamina");
    run_experiment(cfg);
    std::string want = read_file(dir / "out" / "stamina" / "report.json");

    // drop the final state and resume from task 1's checkpoint
    fs::remove(dir / "out" / "stamina" / "checkpoints" / "task_2.json");
    fs::remove(dir / "out" / "stamina" / "report.json");
    ExperimentConfig again = cfg;
    again.resume = true;
    run_experiment(again);
    CHECK(read_file(dir / "out" / "stamina" / "report.json") == want);

    // mismatched config is refused on resume
    ExperimentConfig other = cfg;
    other.resume = true;
    other.seed += 1;
    CHECK_THROWS(run_experiment(other));
    fs::remove_all(dir);
}

TEST_CASE("report table rounds half to even") {
    RunReport r;
    r.run_id = "stamina";
    r.a = 2.125;   // exactly representable; half-even -> 2.12
    r.f = 2.375;   // half-even -> 2.38
    r.p = 1.0;
    std::string table = report_table({r}, Mode::denoiser);
    CHECK(table.find("2.12") != std::string::npos);
    CHECK(table.find("2.38") != std::string::npos);

    std::string empty = report_table({}, Mode::denoiser);
    CHECK(empty.find("Method") != std::string::npos);
    CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
}

TEST_CASE("series csv carries full-precision values") {
    fs::path p = fs::temp_directory_path() / "stamina_series_test.csv";
    write_series_csv(p.string(), "interference_pct", {100.0, 1.0 / 3.0});
    std::string text = read_file(p);
    CHECK(text.find("task,interference_pct\n") == 0);
    CHECK(text.find("1,100\n") != std::string::npos);
    CHECK(text.find("0.33333333333333331") != std::string::npos);
    fs::remove(p);
}

TEST_CASE("json round trips are bit-exact") {
    CounterRng rng(91, 61);
    Mat m(3, 4);
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 4; ++j) m(i, j) = rng.gaussian() * 1e-7;
    Mat back = mat_from_json(mat_to_json(m));
    CHECK((m - back).cwiseAbs().maxCoeff() == 0.0);

    MethodConfig cfg = MethodConfig::defaults(Method::stamina);
    cfg.pretrain_steps = 0;
    ContinualModel model = ContinualModel::init(Mode::denoiser, cfg, 91);
    ContinualModel loaded = model_from_json(model_to_json(model));
    auto a = model.adapted_layers();
    auto b = loaded.adapted_layers();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i]->w_prev - b[i]->w_prev).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a[i]->mask_mlp.l1 - b[i]->mask_mlp.l1).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("selftest passes") { CHECK(selftest() == 0); }
