#pragma once

#include "stamina/adapters.hpp"

#include <vector>

namespace stamina {

// Cross-attention block of the toy conditional denoiser. Queries come from
// the latent stream, keys/values from the conditioning sequence; only the
// key/value projections carry adapters.
struct CrossAttnBlock {
    Mat wq;  // data_dim x hidden, frozen
    Mat wo;  // hidden x data_dim, frozen
    AdaptedLinear wk;  // token_dim x hidden
    AdaptedLinear wv;  // token_dim x hidden
};

// Iterative denoiser over flat data vectors. The conditioning sequence is
// [fixed context tokens; concept token]; the network predicts the clean
// sample from the attention contributions and the noise estimate is
// derived from it under the schedule.
struct ToyDenoiser {
    long data_dim = 16;
    long token_dim = 16;
    // Wide enough that ten tasks' hard masks can claim mostly disjoint
    // support in the K,V projections.
    long hidden = 64;
    long n_ctx = 2;
    int n_steps = 10;  // denoising steps K

    std::vector<CrossAttnBlock> blocks;  // 2 blocks
    Mat ctx;                             // n_ctx x token_dim, frozen
    Mat temb;                            // (n_steps+1) x data_dim, frozen; row k for step k
    std::vector<double> alpha_bar;       // index 0 unused; k = 1..n_steps

    static ToyDenoiser init(long rank, std::uint64_t seed);

    std::vector<AdaptedLinear*> adapted_layers();
    std::vector<const AdaptedLinear*> adapted_layers() const;
    long backbone_param_count() const;

    // Tape-free x0 prediction from current folded weights (w_prev).
    // x: [n x data_dim] noisy samples at step k, token: 1 x token_dim.
    Mat predict_x0(const Mat& x, int k, const Mat& token) const;

    // Deterministic K-step generation from seeded Gaussian noise.
    Mat generate(const Mat& token, int n_samples, std::uint64_t noise_seed) const;
};

// Single self-attention block plus a frozen linear head over token
// sequences; all three projections carry adapters (classification mode).
struct ToyClassifier {
    long token_dim = 16;
    long hidden = 32;
    long seq_len = 4;
    long n_classes = 10;

    AdaptedLinear wq, wk, wv;  // token_dim x hidden
    Mat wo;                    // hidden x token_dim, frozen
    Mat head;                  // token_dim x n_classes, frozen

    static ToyClassifier init(long rank, long n_classes, std::uint64_t seed);

    std::vector<AdaptedLinear*> adapted_layers();
    std::vector<const AdaptedLinear*> adapted_layers() const;
    long backbone_param_count() const;

    // Tape-free logits for one token sequence [seq_len x token_dim].
    Mat logits(const Mat& seq) const;
    int predict(const Mat& seq) const;
};

// Shared forward pieces used by both the tape-free paths above and the
// trainer's differentiable graphs.
Mat attention_value(const Mat& q, const Mat& k, const Mat& v);

}  // namespace stamina
