#pragma once

#include "stamina/adapters.hpp"

#include <optional>

namespace stamina {

struct LossWeights {
    double lambda_f = 1e3;   // forgetting
    double lambda_s = 1e-3;  // sparsity

    void validate() const {
        if (!(lambda_f >= 0.0) || !std::isfinite(lambda_f) || !(lambda_s >= 0.0) ||
            !std::isfinite(lambda_s))
            throw ConfigError("LossWeights: weights must be finite and >= 0");
    }
};

struct LossBreakdown {
    double task = 0.0;
    double forget = 0.0;
    double sparse = 0.0;
    double total = 0.0;
};

// || |w_prev - w_init| .* residual ||_2^2 where residual is the current
// task's weight change ((a b) .* mask, or plain a b for the unmasked
// baseline). The telescoped prior sum is exactly w_prev - w_init.
Tensor forgetting_loss(Tape& t, const AdaptedLinear& layer, const Tensor& residual);

// L1 norm of the (nonnegative) soft mask values.
Tensor sparsity_loss(const Tensor& soft_mask);

// Weighted combination; absent terms contribute zero.
struct TotalLoss {
    Tensor total;
    LossBreakdown parts;
};
TotalLoss total_loss(Tape& t, const LossWeights& w, const Tensor& task,
                     const std::optional<Tensor>& forget,
                     const std::optional<Tensor>& sparse);

}  // namespace stamina
