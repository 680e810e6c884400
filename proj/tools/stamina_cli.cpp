#include "stamina/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace stamina;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string method;
    std::string mode;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int n_tasks = 0;
    bool resume = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config_path, "config file (`key = value` lines)");
    app->add_option("--out", f.out_dir, "output directory");
    app->add_option("--seed", f.seed, "run seed")->each([&](const std::string&) {
        f.seed_set = true;
    });
    app->add_option("--method", f.method, "stamina | clora | naive");
    app->add_option("--n-tasks", f.n_tasks, "number of tasks");
    app->add_option("--mode", f.mode, "denoiser | classifier");
    app->add_flag("--resume", f.resume, "resume from the latest matching checkpoint");
}

// File keys first, then CLI flags on top.
ExperimentConfig build_config(const CommonFlags& f) {
    std::map<std::string, std::string> keys;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw std::runtime_error("cannot open config: " + f.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        keys = parse_config_text(ss.str());
    }
    if (f.seed_set) keys["seed"] = std::to_string(f.seed);
    if (!f.out_dir.empty()) keys["out"] = f.out_dir;
    if (!f.method.empty()) keys["methods"] = f.method;
    if (!f.mode.empty()) keys["mode"] = f.mode;
    if (f.n_tasks > 0) keys["n_tasks"] = std::to_string(f.n_tasks);
    ExperimentConfig cfg = config_from_keys(keys);
    cfg.resume = f.resume;
    return cfg;
}

int do_run(const CommonFlags& f, bool ablate) {
    ExperimentConfig cfg = build_config(f);
    if (ablate) {
        MethodConfig base;
        for (const auto& m : cfg.grid)
            if (m.method == Method::stamina && !m.ablations.any()) base = m;
        base.method = Method::stamina;
        base.seed = cfg.seed;
        cfg.grid = ablation_grid(base);
    }
    for (auto& m : cfg.grid) m.validate();
    auto reports = run_experiment(cfg);
    std::cout << report_table(reports, cfg.mode);
    std::cout << "wrote " << reports.size() << " run(s) under " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stackable masked low-rank adapter benchmark"};
    app.require_subcommand(1);

    CommonFlags run_flags, ablate_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "train a method grid over a task sequence");
    add_common(run_cmd, run_flags);
    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "run the full ablation grid for stamina");
    add_common(ablate_cmd, ablate_flags);

    std::string metrics_dir;
    CLI::App* metrics_cmd =
        app.add_subcommand("metrics", "recompute metrics from a saved run directory");
    metrics_cmd->add_option("run_dir", metrics_dir, "directory holding continual_log.json")
        ->required();

    CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the invariant smoke suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return do_run(run_flags, false);
        if (ablate_cmd->parsed()) return do_run(ablate_flags, true);
        if (metrics_cmd->parsed()) {
            RunReport r = recompute_metrics(metrics_dir);
            ordered_json j = report_to_json(r, "");
            j.erase("config_hash");
            std::cout << j.dump(1) << "\n";
            return 0;
        }
        if (selftest_cmd->parsed()) {
            int failures = selftest();
            std::printf("%s (%d failure%s)\n", failures == 0 ? "selftest passed" : "selftest FAILED",
                        failures, failures == 1 ? "" : "s");
            return failures == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
