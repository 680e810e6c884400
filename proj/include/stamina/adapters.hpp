#pragma once

#include "stamina/rng.hpp"
#include "stamina/tensor.hpp"

namespace stamina {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Temperature / estimator settings for the binary mask relaxation.
struct GumbelConfig {
    double tau = 0.5;
    bool hard = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("GumbelConfig: tau must be > 0");
    }
};

// Two-layer MLP emitting mask logits for one adapted weight.
// Evaluated on a fixed all-ones input; output flattens [D1, D2, 2] row-major.
struct MaskMlp {
    Mat l1;  // r x r
    Mat l2;  // r x (d1*d2*2)
    long d1 = 0, d2 = 0, rank = 0;

    static MaskMlp init(long d1, long d2, long rank, CounterRng& rng);
    bool consistent() const {
        return l1.rows() == rank && l1.cols() == rank && l2.rows() == rank &&
               l2.cols() == d1 * d2 * 2;
    }
};

// Two-layer MLP producing one concept-token embedding from a fixed
// all-ones input. Both layers are d_token x d_token.
struct TokenMlp {
    Mat l1;
    Mat l2;

    static TokenMlp init(long d_token, CounterRng& rng);
};

// One adapted projection weight: frozen base, folded history, and the
// live low-rank adapter for the task currently in training.
struct AdaptedLinear {
    Mat w_init;        // D1 x D2, never written after construction
    Mat w_prev;        // w_init plus every folded task delta
    Mat a;             // D1 x r
    Mat b;             // r x D2
    MaskMlp mask_mlp;
    long rank = 0;
    Mat changed_mask;  // 0/1; union of folded nonzero-delta positions

    static AdaptedLinear init(Mat w_init, long rank, CounterRng& rng);

    long d1() const { return w_init.rows(); }
    long d2() const { return w_init.cols(); }

    // Fresh zero-residual adapter for the next task.
    void reinit_adapter(CounterRng& rng);
};

// --- tape-free evaluation (fold, inference, oracles) --------------------

// relu(l1^T 1) through l2; flat 1 x (d1*d2*2) logit row.
Mat mask_logits_value(const MaskMlp& m);

// 1 where channel-1 logit strictly exceeds channel-0, else 0 (ties -> 0).
Mat deterministic_mask(const Mat& flat_logits, long d1, long d2);

Mat token_embed_value(const TokenMlp& m);  // 1 x d_token

// Merge the trained adapter into w_prev using the noise-free mask,
// update changed_mask, and reinitialize the adapter.
// Returns the folded delta.
Mat fold(AdaptedLinear& layer, CounterRng& reinit_rng);

// --- tape graph builders ------------------------------------------------

// Leaves for one layer's trainable parameters within a step's tape.
struct MaskMlpGraph {
    Tensor l1;
    Tensor l2;
};

struct TokenMlpGraph {
    Tensor l1;
    Tensor l2;
};

MaskMlpGraph make_mask_mlp_leaves(Tape& t, const MaskMlp& m);
TokenMlpGraph make_token_mlp_leaves(Tape& t, const TokenMlp& m);

// Differentiable logits, flat 1 x (d1*d2*2).
Tensor mask_logits(Tape& t, const MaskMlpGraph& g, long rank);

// Binary-categorical Gumbel-Softmax over the channel pair; returns the
// channel-1 ("pass") values. soft is always the differentiable relaxation;
// mask is the hard straight-through forward when cfg.hard, else soft.
struct MaskSample {
    Tensor soft;
    Tensor mask;
};
MaskSample gumbel_softmax_mask(Tape& t, const Tensor& flat_logits, long d1, long d2,
                               const GumbelConfig& cfg, const Mat& g0, const Mat& g1);

// Per-position Gumbel(0,1) noise for one (seed, layer, step) stream.
Mat sample_gumbel(long d1, long d2, std::uint64_t seed, std::uint64_t layer_id,
                  std::uint64_t step, int channel);

// w_prev + (a b) .* mask
Tensor effective_weight(const Tensor& w_prev, const Tensor& a, const Tensor& b,
                        const Tensor& mask);

// l2^T relu(l1^T 1) as a 1 x d_token row.
Tensor token_embed(Tape& t, const TokenMlpGraph& g);

}  // namespace stamina
