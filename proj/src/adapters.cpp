#include "stamina/adapters.hpp"

namespace stamina {

static Mat gaussian_mat(long rows, long cols, double stddev, CounterRng& rng) {
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = stddev * rng.gaussian();
    return m;
}

MaskMlp MaskMlp::init(long d1, long d2, long rank, CounterRng& rng) {
    MaskMlp m;
    m.d1 = d1;
    m.d2 = d2;
    m.rank = rank;
    m.l1 = gaussian_mat(rank, rank, 0.02, rng);
    m.l2 = Mat::Zero(rank, d1 * d2 * 2);  // zero logits at task start
    return m;
}

TokenMlp TokenMlp::init(long d_token, CounterRng& rng) {
    TokenMlp m;
    m.l1 = gaussian_mat(d_token, d_token, 1.0 / std::sqrt(double(d_token)), rng);
    m.l2 = Mat::Zero(d_token, d_token);  // zero embedding at task start
    return m;
}

AdaptedLinear AdaptedLinear::init(Mat w_init, long rank, CounterRng& rng) {
    if (rank < 1 || rank > std::min(w_init.rows(), w_init.cols()))
        throw ConfigError("AdaptedLinear: rank " + std::to_string(rank) +
                          " out of range for " + shape_str(w_init));
    AdaptedLinear l;
    l.w_init = w_init;
    l.w_prev = std::move(w_init);
    l.rank = rank;
    l.changed_mask = Mat::Zero(l.w_init.rows(), l.w_init.cols());
    l.reinit_adapter(rng);
    return l;
}

void AdaptedLinear::reinit_adapter(CounterRng& rng) {
    a = gaussian_mat(d1(), rank, 0.02, rng);
    b = Mat::Zero(rank, d2());  // residual starts exactly at zero
    mask_mlp = MaskMlp::init(d1(), d2(), rank, rng);
}

Mat mask_logits_value(const MaskMlp& m) {
    if (!m.consistent()) throw ConfigError("MaskMlp: inconsistent layer shapes");
    Vec h = (m.l1.transpose() * Vec::Ones(m.rank)).cwiseMax(0.0);
    return (m.l2.transpose() * h).transpose();
}

Mat deterministic_mask(const Mat& flat_logits, long d1, long d2) {
    if (flat_logits.rows() != 1 || flat_logits.cols() != d1 * d2 * 2)
        throw DimensionError("deterministic_mask: bad logits " + shape_str(flat_logits));
    Mat mask(d1, d2);
    for (long i = 0; i < d1; ++i)
        for (long j = 0; j < d2; ++j) {
            double c0 = flat_logits(0, (i * d2 + j) * 2);
            double c1 = flat_logits(0, (i * d2 + j) * 2 + 1);
            mask(i, j) = c1 > c0 ? 1.0 : 0.0;  // tie -> 0
        }
    return mask;
}

Mat token_embed_value(const TokenMlp& m) {
    long d = m.l1.rows();
    Vec h = (m.l1.transpose() * Vec::Ones(d)).cwiseMax(0.0);
    return (m.l2.transpose() * h).transpose();
}

Mat fold(AdaptedLinear& layer, CounterRng& reinit_rng) {
    Mat mask = deterministic_mask(mask_logits_value(layer.mask_mlp), layer.d1(), layer.d2());
    Mat delta = (layer.a * layer.b).cwiseProduct(mask);
    layer.w_prev += delta;
    for (long i = 0; i < delta.rows(); ++i)
        for (long j = 0; j < delta.cols(); ++j)
            if (delta(i, j) != 0.0) layer.changed_mask(i, j) = 1.0;
    layer.reinit_adapter(reinit_rng);
    return delta;
}

MaskMlpGraph make_mask_mlp_leaves(Tape& t, const MaskMlp& m) {
    return MaskMlpGraph{make_leaf(t, m.l1), make_leaf(t, m.l2)};
}

TokenMlpGraph make_token_mlp_leaves(Tape& t, const TokenMlp& m) {
    return TokenMlpGraph{make_leaf(t, m.l1), make_leaf(t, m.l2)};
}

Tensor mask_logits(Tape& t, const MaskMlpGraph& g, long rank) {
    Tensor ones = make_constant(t, Mat::Ones(rank, 1));
    Tensor h = relu(matmul(transpose(g.l1), ones));
    return transpose(matmul(transpose(g.l2), h));
}

Mat sample_gumbel(long d1, long d2, std::uint64_t seed, std::uint64_t layer_id,
                  std::uint64_t step, int channel) {
    CounterRng rng(seed, stream_id(layer_id, step, 0xD00 + channel));
    Mat g(d1, d2);
    for (long i = 0; i < d1; ++i)
        for (long j = 0; j < d2; ++j) g(i, j) = rng.gumbel();
    return g;
}

MaskSample gumbel_softmax_mask(Tape& t, const Tensor& flat_logits, long d1, long d2,
                               const GumbelConfig& cfg, const Mat& g0, const Mat& g1) {
    cfg.validate();
    if (!flat_logits.value().allFinite())
        throw NumericError("gumbel_softmax_mask: non-finite logits");
    Tensor c0 = channel_split(flat_logits, d1, d2, 0);
    Tensor c1 = channel_split(flat_logits, d1, d2, 1);
    // Two-way softmax over the channel pair reduces to a sigmoid of the
    // perturbed logit difference.
    Tensor noise = make_constant(t, g1 - g0);
    Tensor pre = scale(add(sub(c1, c0), noise), 1.0 / cfg.tau);
    MaskSample out;
    out.soft = sigmoid(pre);
    out.mask = cfg.hard ? hard_threshold_st(pre) : out.soft;
    return out;
}

Tensor effective_weight(const Tensor& w_prev, const Tensor& a, const Tensor& b,
                        const Tensor& mask) {
    return add(w_prev, mul(matmul(a, b), mask));
}

Tensor token_embed(Tape& t, const TokenMlpGraph& g) {
    long d = g.l1.value().rows();
    Tensor ones = make_constant(t, Mat::Ones(d, 1));
    Tensor h = relu(matmul(transpose(g.l1), ones));
    return transpose(matmul(transpose(g.l2), h));
}

}  // namespace stamina
