#pragma once

#include "stamina/tensor.hpp"
#include "stamina/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace stamina {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic stand-in for a semantic embedding space: identity, or a
// fixed seeded random orthonormal projection.
struct Embedder {
    enum class Kind { identity, random_projection };
    Kind kind = Kind::identity;
    std::uint64_t seed = 0;
    Mat proj;  // in_dim x out_dim, orthonormal columns

    static Embedder make_identity();
    static Embedder make_random_projection(long in_dim, long out_dim, std::uint64_t seed);

    Mat embed(const Mat& samples) const;  // row-wise
};

// Everything the metric suite needs from one continual run. Snapshots are
// stored post-embedder; indices are 1-based task ids.
struct ContinualLog {
    int n_tasks = 0;
    // snapshot(i, j): embedded samples of concept j generated after task i, j <= i.
    std::vector<std::vector<Mat>> snapshots;
    // per task, per adapted layer: (first-time positions, |support(dW_t)|)
    std::vector<std::vector<std::pair<long, long>>> interference_counts;
    // per task, per adapted layer: ||W_t - W_init||_F
    std::vector<std::vector<double>> weight_dist;
    std::vector<std::vector<double>> loss_curves;  // per task
    // classifier mode: acc(i, j) = accuracy on task j's eval set after task i
    std::vector<std::vector<double>> accuracy;
    double trainable_param_pct = 0.0;

    const Mat& snapshot(int i, int j) const;
    void record_snapshot(int i, int j, Mat embedded);
};

// Unbiased MMD^2 with the degree-3 polynomial kernel (x.y/d + 1)^3.
// Diagonal terms are excluded; small negative estimates are reported as-is.
double mmd2(const Mat& x, const Mat& y);

// Permutation-test p-value for mmd2(x, y) under the pooled null.
double mmd2_permutation_pvalue(const Mat& x, const Mat& y, int n_perms,
                               std::uint64_t seed);

// Metric values carry the paper's 1e3 reporting scale.
double a_mmd(const ContinualLog& log, const std::vector<Mat>& dataset_embeds);
double f_mmd(const ContinualLog& log);
double p_mmd(const ContinualLog& log, const std::vector<Mat>& dataset_embeds);

// Per-task percentage of support(dW_t) landing on never-before-modified
// positions, averaged over layers; empty support reports 100.
std::vector<double> interference_series(const ContinualLog& log);

// Per-task ||W_t - W_init||_F averaged over adapted layers.
std::vector<double> weight_distance_series(const ContinualLog& log);

}  // namespace stamina
