#include "stamina/models.hpp"

namespace stamina {

static Mat gaussian_mat(long rows, long cols, double stddev, CounterRng& rng) {
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = stddev * rng.gaussian();
    return m;
}

Mat attention_value(const Mat& q, const Mat& k, const Mat& v) {
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Mat scores = q * k.transpose() * inv_sqrt_d;
    Mat out(q.rows(), v.cols());
    for (long i = 0; i < scores.rows(); ++i) {
        double mx = scores.row(i).maxCoeff();
        Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
        Eigen::ArrayXd p = e / e.sum();
        out.row(i) = p.matrix().transpose() * v;
    }
    return out;
}

ToyDenoiser ToyDenoiser::init(long rank, std::uint64_t seed) {
    ToyDenoiser d;
    CounterRng rng(seed, stream_id(0xBACB));
    double sq = 1.0 / std::sqrt(static_cast<double>(d.data_dim));
    double sh = 1.0 / std::sqrt(static_cast<double>(d.hidden));
    for (int b = 0; b < 2; ++b) {
        CrossAttnBlock blk;
        blk.wq = gaussian_mat(d.data_dim, d.hidden, sq, rng);
        blk.wo = gaussian_mat(d.hidden, d.data_dim, sh, rng);
        blk.wk = AdaptedLinear::init(gaussian_mat(d.token_dim, d.hidden, sq, rng), rank, rng);
        blk.wv = AdaptedLinear::init(gaussian_mat(d.token_dim, d.hidden, sq, rng), rank, rng);
        d.blocks.push_back(std::move(blk));
    }
    d.ctx = gaussian_mat(d.n_ctx, d.token_dim, 1.0, rng);
    d.temb = gaussian_mat(d.n_steps + 1, d.data_dim, 1.0, rng);
    // linear beta schedule; alpha_bar runs from mild to heavy noise
    d.alpha_bar.assign(d.n_steps + 1, 1.0);
    double prod = 1.0;
    for (int k = 1; k <= d.n_steps; ++k) {
        double beta = 0.02 + (0.15 - 0.02) * (k - 1) / double(d.n_steps - 1);
        prod *= 1.0 - beta;
        d.alpha_bar[k] = prod;
    }
    return d;
}

std::vector<AdaptedLinear*> ToyDenoiser::adapted_layers() {
    std::vector<AdaptedLinear*> out;
    for (auto& b : blocks) {
        out.push_back(&b.wk);
        out.push_back(&b.wv);
    }
    return out;
}

std::vector<const AdaptedLinear*> ToyDenoiser::adapted_layers() const {
    std::vector<const AdaptedLinear*> out;
    for (auto& b : blocks) {
        out.push_back(&b.wk);
        out.push_back(&b.wv);
    }
    return out;
}

long ToyDenoiser::backbone_param_count() const {
    long n = ctx.size() + temb.size();
    for (auto& b : blocks)
        n += b.wq.size() + b.wo.size() + b.wk.w_init.size() + b.wv.w_init.size();
    return n;
}

Mat ToyDenoiser::predict_x0(const Mat& x, int k, const Mat& token) const {
    if (x.cols() != data_dim)
        throw DimensionError("predict_x0: bad sample width " + shape_str(x));
    Mat c(n_ctx + 1, token_dim);
    c.topRows(n_ctx) = ctx;
    c.bottomRows(1) = token;
    Mat f = x;
    f.rowwise() += temb.row(k);
    Mat f0 = f;
    for (const auto& b : blocks) {
        Mat attn = attention_value(f * b.wq, c * b.wk.w_prev, c * b.wv.w_prev);
        f += attn * b.wo;
    }
    return f - f0;  // the accumulated attention contributions
}

Mat ToyDenoiser::generate(const Mat& token, int n_samples, std::uint64_t noise_seed) const {
    if (n_samples == 0) return Mat(0, data_dim);
    CounterRng rng(noise_seed, stream_id(0x6E1));
    Mat x = gaussian_mat(n_samples, data_dim, 1.0, rng);
    for (int k = n_steps; k >= 1; --k) {
        Mat x0 = predict_x0(x, k, token);
        if (k == 1) {
            x = x0;
        } else {
            // DDIM-style deterministic update
            Mat eps = (x - std::sqrt(alpha_bar[k]) * x0) / std::sqrt(1.0 - alpha_bar[k]);
            x = std::sqrt(alpha_bar[k - 1]) * x0 +
                std::sqrt(1.0 - alpha_bar[k - 1]) * eps;
        }
    }
    return x;
}

ToyClassifier ToyClassifier::init(long rank, long n_classes, std::uint64_t seed) {
    ToyClassifier c;
    c.n_classes = n_classes;
    CounterRng rng(seed, stream_id(0xC1A5));
    double sq = 1.0 / std::sqrt(static_cast<double>(c.token_dim));
    double sh = 1.0 / std::sqrt(static_cast<double>(c.hidden));
    c.wq = AdaptedLinear::init(gaussian_mat(c.token_dim, c.hidden, sq, rng), rank, rng);
    c.wk = AdaptedLinear::init(gaussian_mat(c.token_dim, c.hidden, sq, rng), rank, rng);
    c.wv = AdaptedLinear::init(gaussian_mat(c.token_dim, c.hidden, sq, rng), rank, rng);
    c.wo = gaussian_mat(c.hidden, c.token_dim, sh, rng);
    // Per-class output embeddings: each column is learned during the task
    // that introduces its class and frozen afterwards (class-incremental head).
    c.head = Mat::Zero(c.token_dim, n_classes);
    return c;
}

std::vector<AdaptedLinear*> ToyClassifier::adapted_layers() { return {&wq, &wk, &wv}; }
std::vector<const AdaptedLinear*> ToyClassifier::adapted_layers() const {
    return {&wq, &wk, &wv};
}

long ToyClassifier::backbone_param_count() const {
    return wq.w_init.size() + wk.w_init.size() + wv.w_init.size() + wo.size() + head.size();
}

Mat ToyClassifier::logits(const Mat& seq) const {
    if (seq.rows() != seq_len || seq.cols() != token_dim)
        throw DimensionError("classifier: bad sequence " + shape_str(seq));
    Mat attn = attention_value(seq * wq.w_prev, seq * wk.w_prev, seq * wv.w_prev);
    Mat feat = (attn * wo).colwise().mean();
    return feat * head;
}

int ToyClassifier::predict(const Mat& seq) const {
    Mat z = logits(seq);
    Eigen::Index best = 0;
    z.row(0).maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace stamina
