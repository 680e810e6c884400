#include "stamina/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace stamina {

Embedder Embedder::make_identity() { return Embedder{}; }

Embedder Embedder::make_random_projection(long in_dim, long out_dim, std::uint64_t seed) {
    if (out_dim > in_dim)
        throw DimensionError("Embedder: out_dim " + std::to_string(out_dim) +
                             " exceeds in_dim " + std::to_string(in_dim));
    CounterRng rng(seed, stream_id(0xE3BD));
    Mat g(in_dim, in_dim);
    for (long i = 0; i < in_dim; ++i)
        for (long j = 0; j < in_dim; ++j) g(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(in_dim, in_dim);
    Embedder e;
    e.kind = Kind::random_projection;
    e.seed = seed;
    e.proj = q.leftCols(out_dim);
    return e;
}

Mat Embedder::embed(const Mat& samples) const {
    if (kind == Kind::identity) return samples;
    if (samples.cols() != proj.rows())
        throw DimensionError("embed: sample dim " + shape_str(samples) +
                             " vs projection " + shape_str(proj));
    return samples * proj;
}

const Mat& ContinualLog::snapshot(int i, int j) const {
    if (i < 1 || i > n_tasks || j < 1 || j > i ||
        static_cast<int>(snapshots.size()) < i ||
        static_cast<int>(snapshots[i - 1].size()) < j || snapshots[i - 1][j - 1].size() == 0)
        throw MetricError("missing snapshot X_{" + std::to_string(i) + "," +
                          std::to_string(j) + "}");
    return snapshots[i - 1][j - 1];
}

void ContinualLog::record_snapshot(int i, int j, Mat embedded) {
    if (static_cast<int>(snapshots.size()) < i) snapshots.resize(i);
    if (static_cast<int>(snapshots[i - 1].size()) < j) snapshots[i - 1].resize(j);
    snapshots[i - 1][j - 1] = std::move(embedded);
}

static double poly_kernel(const Mat& x, long i, const Mat& y, long j) {
    double s = x.row(i).dot(y.row(j)) / static_cast<double>(x.cols()) + 1.0;
    return s * s * s;
}

double mmd2(const Mat& x, const Mat& y) {
    long m = x.rows(), n = y.rows();
    if (m < 2 || n < 2)
        throw MetricError("mmd2: need at least 2 samples per set, got " +
                          std::to_string(m) + " and " + std::to_string(n));
    if (x.cols() != y.cols())
        throw DimensionError("mmd2: embedding dims differ " + shape_str(x) + " vs " +
                             shape_str(y));
    // A set compared with itself is at distance 0: the cross-term pairs are
    // not independent draws, so the unbiased estimator does not apply.
    if (m == n && x == y) return 0.0;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < m; ++j)
            if (i != j) sxx += poly_kernel(x, i, x, j);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            if (i != j) syy += poly_kernel(y, i, y, j);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < n; ++j) sxy += poly_kernel(x, i, y, j);
    return sxx / double(m * (m - 1)) + syy / double(n * (n - 1)) -
           2.0 * sxy / double(m * n);
}

double mmd2_permutation_pvalue(const Mat& x, const Mat& y, int n_perms,
                               std::uint64_t seed) {
    long m = x.rows(), n = y.rows();
    Mat pool(m + n, x.cols());
    pool.topRows(m) = x;
    pool.bottomRows(n) = y;
    double observed = mmd2(x, y);
    CounterRng rng(seed, stream_id(0x9E21));
    int ge = 0;
    std::vector<long> idx(m + n);
    for (long i = 0; i < m + n; ++i) idx[i] = i;
    for (int p = 0; p < n_perms; ++p) {
        for (long i = m + n - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.below(static_cast<std::uint64_t>(i + 1))]);
        Mat px(m, x.cols()), py(n, x.cols());
        for (long i = 0; i < m; ++i) px.row(i) = pool.row(idx[i]);
        for (long i = 0; i < n; ++i) py.row(i) = pool.row(idx[m + i]);
        if (mmd2(px, py) >= observed) ++ge;
    }
    return (ge + 1.0) / (n_perms + 1.0);
}

double a_mmd(const ContinualLog& log, const std::vector<Mat>& dataset_embeds) {
    int n = log.n_tasks;
    if (static_cast<int>(dataset_embeds.size()) < n)
        throw MetricError("a_mmd: missing dataset embeddings");
    double s = 0.0;
    for (int j = 1; j <= n; ++j) s += mmd2(dataset_embeds[j - 1], log.snapshot(n, j));
    return 1e3 * s / n;
}

double f_mmd(const ContinualLog& log) {
    int n = log.n_tasks;
    if (n < 2) throw MetricError("f_mmd: undefined for fewer than 2 tasks");
    double s = 0.0;
    for (int j = 1; j < n; ++j) s += mmd2(log.snapshot(j, j), log.snapshot(n, j));
    return 1e3 * s / (n - 1);
}

double p_mmd(const ContinualLog& log, const std::vector<Mat>& dataset_embeds) {
    int n = log.n_tasks;
    if (static_cast<int>(dataset_embeds.size()) < n)
        throw MetricError("p_mmd: missing dataset embeddings");
    double s = 0.0;
    for (int j = 1; j <= n; ++j) s += mmd2(dataset_embeds[j - 1], log.snapshot(j, j));
    return 1e3 * s / n;
}

std::vector<double> interference_series(const ContinualLog& log) {
    std::vector<double> out;
    for (const auto& task : log.interference_counts) {
        double acc = 0.0;
        for (const auto& [fresh, support] : task)
            acc += support == 0 ? 100.0 : 100.0 * double(fresh) / double(support);
        out.push_back(task.empty() ? 100.0 : acc / double(task.size()));
    }
    return out;
}

std::vector<double> weight_distance_series(const ContinualLog& log) {
    std::vector<double> out;
    for (const auto& task : log.weight_dist) {
        double acc = 0.0;
        for (double d : task) acc += d;
        out.push_back(task.empty() ? 0.0 : acc / double(task.size()));
    }
    return out;
}

}  // namespace stamina
