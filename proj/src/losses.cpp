#include "stamina/losses.hpp"

namespace stamina {

Tensor forgetting_loss(Tape& t, const AdaptedLinear& layer, const Tensor& residual) {
    if (residual.rows() != layer.d1() || residual.cols() != layer.d2())
        throw DimensionError("forgetting_loss: residual " + shape_str(residual.value()) +
                             " vs weight " + shape_str(layer.w_init));
    Mat prior = (layer.w_prev - layer.w_init).cwiseAbs();
    return l2_norm_sq(mul(make_constant(t, std::move(prior)), residual));
}

Tensor sparsity_loss(const Tensor& soft_mask) { return l1_sum(soft_mask); }

TotalLoss total_loss(Tape& t, const LossWeights& w, const Tensor& task,
                     const std::optional<Tensor>& forget,
                     const std::optional<Tensor>& sparse) {
    w.validate();
    TotalLoss out;
    out.parts.task = task.value()(0, 0);
    Tensor total = task;
    if (forget) {
        out.parts.forget = forget->value()(0, 0);
        total = add(total, scale(*forget, w.lambda_f));
    }
    if (sparse) {
        out.parts.sparse = sparse->value()(0, 0);
        total = add(total, scale(*sparse, w.lambda_s));
    }
    out.total = total;
    out.parts.total = total.value()(0, 0);
    (void)t;
    return out;
}

}  // namespace stamina
