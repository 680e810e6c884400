#pragma once

#include "stamina/serialize.hpp"

#include <map>
#include <string>
#include <vector>

namespace stamina {

// Synthetic stand-in for a concept dataset: Gaussian clusters (denoiser)
// or labeled token-sequence clusters (classifier).
struct ConceptGenerator {
    Mode mode = Mode::denoiser;
    std::uint64_t seed = 0;
    long data_dim = 16;
    long seq_len = 4;
    double center_radius = 1.5;
    double noise_scale = 0.15;
    int samples_per_concept = 64;  // train split
    int eval_samples = 32;
    int classes_per_task = 2;
};

struct GeneratedTasks {
    std::vector<TaskSpec> specs;
    std::vector<ConceptBatch> batches;
    std::vector<Mat> dataset_embeds;  // embedded eval split per concept (X_{D,j})
};

GeneratedTasks generate_concepts(const ConceptGenerator& gen, int n_tasks,
                                 const Embedder& embedder, int steps, int batch_size);

struct ExperimentConfig {
    Mode mode = Mode::denoiser;
    int n_tasks = 10;
    int steps = 200;
    int batch_size = 16;
    int eval_samples = 32;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    bool resume = false;
    ConceptGenerator gen;
    std::string embedder_kind = "random_projection";
    long d_embed = 16;
    std::vector<MethodConfig> grid;

    Embedder make_embedder() const;
    std::string hash() const;  // stable digest of every field
};

// `key = value` lines, `#` comments, UTF-8. CLI flags override file keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);
ExperimentConfig config_from_keys(const std::map<std::string, std::string>& keys);
ExperimentConfig load_config_file(const std::string& path);

// Expands the ablation grid: full stamina plus the five single ablations.
std::vector<MethodConfig> ablation_grid(const MethodConfig& base);

struct RunReport {
    std::string run_id;
    MethodConfig cfg;
    ContinualLog log;
    double a = 0, f = 0, p = 0;  // x1e3 MMD metrics (denoiser mode)
    double final_avg_accuracy = 0;  // classifier mode
    std::vector<double> interference;
    std::vector<double> weight_distance;
    std::vector<double> plasticity_per_task;
};

RunReport make_report(const std::string& run_id, const MethodConfig& cfg,
                      const ContinualLog& log, const std::vector<Mat>& dataset_embeds,
                      Mode mode);

ordered_json report_to_json(const RunReport& r, const std::string& config_hash);

// Fixed-column text table over a set of runs plus one CSV per series.
std::string report_table(const std::vector<RunReport>& runs, Mode mode);
void write_series_csv(const std::string& path, const std::string& series_name,
                      const std::vector<double>& values);

// Runs the whole grid (shared concept data, STAMINA_THREADS-way parallel),
// writes <out>/<run-id>/{report.json,report.txt,series_*.csv,checkpoints/}.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg);

// Recompute a RunReport from a saved continual_log.json.
RunReport recompute_metrics(const std::string& run_dir);

// Invariant smoke suite for the `selftest` subcommand; returns failures.
int selftest();

}  // namespace stamina
