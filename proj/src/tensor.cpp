#include "stamina/tensor.hpp"

#include <cmath>

namespace stamina {

void Tape::backward(const Tensor& root) {
    if (root.tape != this)
        throw std::invalid_argument("backward: root belongs to another tape");
    const Node& r = nodes_[root.id];
    if (r.value.rows() != 1 || r.value.cols() != 1)
        throw std::invalid_argument("backward: root must be scalar, got " + shape_str(r.value));
    nodes_[root.id].grad = Mat::Ones(1, 1);
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.size() == 0 || !n.back) continue;
        n.back(*this, n);
    }
}

Tensor make_leaf(Tape& t, Mat value, bool requires_grad) {
    return t.wrap(t.leaf(std::move(value), requires_grad));
}

Tensor make_constant(Tape& t, Mat value) {
    return t.wrap(t.constant(std::move(value)));
}

static Tape& same_tape(const Tensor& a, const Tensor& b) {
    if (a.tape != b.tape)
        throw std::invalid_argument("operands belong to different tapes");
    return *a.tape;
}

static void require_same_shape(const Mat& x, const Mat& y, const char* op) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(x) +
                             " vs " + shape_str(y));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tape& t = same_tape(a, b);
    const Mat& x = a.value();
    const Mat& y = b.value();
    if (x.cols() != y.rows())
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(x) +
                             " x " + shape_str(y));
    int ia = a.id, ib = b.id;
    Mat out = x * y;
    return t.wrap(t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tape::Node& n) {
        const Mat& dX = n.grad;
        tp.accumulate(ia, dX * tp.node(ib).value.transpose());
        tp.accumulate(ib, tp.node(ia).value.transpose() * dX);
    }));
}

Tensor transpose(const Tensor& a) {
    Tape& t = *a.tape;
    int ia = a.id;
    Mat out = a.value().transpose();
    return t.wrap(t.emit(std::move(out), {ia}, [ia](Tape& tp, const Tape::Node& n) {
        tp.accumulate(ia, n.grad.transpose());
    }));
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    int ia = a.id, ib = b.id;
    Mat out = a.value() + b.value();
    return t.wrap(t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tape::Node& n) {
        tp.accumulate(ia, n.grad);
        tp.accumulate(ib, n.grad);
    }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    int ia = a.id, ib = b.id;
    Mat out = a.value() - b.value();
    return t.wrap(t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tape::Node& n) {
        tp.accumulate(ia, n.grad);
        tp.accumulate(ib, -n.grad);
    }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    int ia = a.id, ib = b.id;
    Mat out = a.value().cwiseProduct(b.value());
    return t.wrap(t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tape::Node& n) {
        tp.accumulate(ia, n.grad.cwiseProduct(tp.node(ib).value));
        tp.accumulate(ib, n.grad.cwiseProduct(tp.node(ia).value));
    }));
}

Tensor scale(const Tensor& a, double s) {
    Tape& t = *a.tape;
    int ia = a.id;
    Mat out = a.value() * s;
    return t.wrap(t.emit(std::move(out), {ia}, [ia, s](Tape& tp, const Tape::Node& n) {
        tp.accumulate(ia, n.grad * s);
    }));
}

Tensor relu(const Tensor& a) {
    Tape& t = *a.tape;
    int ia = a.id;
    Mat out = a.value().cwiseMax(0.0);
    return t.wrap(t.emit(std::move(out), {ia}, [ia](Tape& tp, const Tape::Node& n) {
        // subgradient 0 at the kink
        Mat m = (tp.node(ia).value.array() > 0.0).cast<double>();
        tp.accumulate(ia, n.grad.cwiseProduct(m));
    }));
}

Tensor abs(const Tensor& a) {
    Tape& t = *a.tape;
    int ia = a.id;
    Mat out = a.value().cwiseAbs();
    return t.wrap(t.emit(std::move(out), {ia}, [ia](Tape& tp, const Tape::Node& n) {
        const Mat& x = tp.node(ia).value;
        Mat s = (x.array() > 0.0).cast<double>() - (x.array() < 0.0).cast<double>();
        tp.accumulate(ia, n.grad.cwiseProduct(s));
    }));
}

Tensor sigmoid(const Tensor& a) {
    Tape& t = *a.tape;
    int ia = a.id;
    Mat out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    int self = t.emit(std::move(out), {ia}, [ia](Tape& tp, const Tape::Node& n) {
        const Mat& s = n.value;
        Mat d = s.array() * (1.0 - s.array());
        tp.accumulate(ia, n.grad.cwiseProduct(d));
    });
    return t.wrap(self);
}

Tensor softmax(const Tensor& a, int axis) {
    Tape& t = *a.tape;
    if (axis != 0 && axis != 1)
        throw std::invalid_argument("softmax: axis must be 0 or 1");
    const Mat& x = a.value();
    if (!x.allFinite())
        throw NumericError("softmax: non-finite input");
    int ia = a.id;
    Mat out(x.rows(), x.cols());
    if (axis == 1) {
        for (long i = 0; i < x.rows(); ++i) {
            double mx = x.row(i).maxCoeff();
            Eigen::ArrayXd e = (x.row(i).array() - mx).exp();
            out.row(i) = (e / e.sum()).matrix();
        }
    } else {
        for (long j = 0; j < x.cols(); ++j) {
            double mx = x.col(j).maxCoeff();
            Eigen::ArrayXd e = (x.col(j).array() - mx).exp();
            out.col(j) = (e / e.sum()).matrix();
        }
    }
    return t.wrap(t.emit(std::move(out), {ia}, [ia, axis](Tape& tp, const Tape::Node& n) {
        const Mat& s = n.value;
        const Mat& g = n.grad;
        Mat dx(s.rows(), s.cols());
        if (axis == 1) {
            for (long i = 0; i < s.rows(); ++i) {
                double dot = s.row(i).dot(g.row(i));
                dx.row(i) = s.row(i).cwiseProduct(g.row(i) - Mat::Constant(1, s.cols(), dot));
            }
        } else {
            for (long j = 0; j < s.cols(); ++j) {
                double dot = s.col(j).dot(g.col(j));
                dx.col(j) = s.col(j).cwiseProduct(g.col(j) - Mat::Constant(s.rows(), 1, dot));
            }
        }
        tp.accumulate(ia, dx);
    }));
}

Tensor sum(const Tensor& a) {
    Tape& t = *a.tape;
    int ia = a.id;
    Mat out = Mat::Constant(1, 1, a.value().sum());
    return t.wrap(t.emit(std::move(out), {ia}, [ia](Tape& tp, const Tape::Node& n) {
        const Mat& x = tp.node(ia).value;
        tp.accumulate(ia, Mat::Constant(x.rows(), x.cols(), n.grad(0, 0)));
    }));
}

Tensor l1_sum(const Tensor& a) { return sum(abs(a)); }

Tensor l2_norm_sq(const Tensor& a) { return sum(mul(a, a)); }

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    Tape& t = same_tape(a, b);
    const Mat& x = a.value();
    const Mat& y = b.value();
    if (x.cols() != y.cols())
        throw DimensionError("concat_rows: column mismatch " + shape_str(x) + " vs " +
                             shape_str(y));
    int ia = a.id, ib = b.id;
    Mat out(x.rows() + y.rows(), x.cols());
    out.topRows(x.rows()) = x;
    out.bottomRows(y.rows()) = y;
    long ra = x.rows();
    return t.wrap(t.emit(std::move(out), {ia, ib}, [ia, ib, ra](Tape& tp, const Tape::Node& n) {
        tp.accumulate(ia, n.grad.topRows(ra));
        tp.accumulate(ib, n.grad.bottomRows(n.grad.rows() - ra));
    }));
}

Tensor channel_split(const Tensor& flat, long d1, long d2, int channel) {
    Tape& t = *flat.tape;
    const Mat& x = flat.value();
    if (x.rows() != 1 || x.cols() != d1 * d2 * 2)
        throw DimensionError("channel_split: expected 1x" + std::to_string(d1 * d2 * 2) +
                             ", got " + shape_str(x));
    if (channel != 0 && channel != 1)
        throw std::invalid_argument("channel_split: channel must be 0 or 1");
    int ia = flat.id;
    Mat out(d1, d2);
    for (long i = 0; i < d1; ++i)
        for (long j = 0; j < d2; ++j)
            out(i, j) = x(0, (i * d2 + j) * 2 + channel);
    return t.wrap(
        t.emit(std::move(out), {ia}, [ia, d1, d2, channel](Tape& tp, const Tape::Node& n) {
            Mat g = Mat::Zero(1, d1 * d2 * 2);
            for (long i = 0; i < d1; ++i)
                for (long j = 0; j < d2; ++j)
                    g(0, (i * d2 + j) * 2 + channel) = n.grad(i, j);
            tp.accumulate(ia, g);
        }));
}

Tensor hard_threshold_st(const Tensor& x) {
    Tape& t = *x.tape;
    int ia = x.id;
    Mat out = (x.value().array() > 0.0).cast<double>();
    return t.wrap(t.emit(std::move(out), {ia}, [ia](Tape& tp, const Tape::Node& n) {
        Eigen::ArrayXXd s = 1.0 / (1.0 + (-tp.node(ia).value.array()).exp());
        Mat d = (s * (1.0 - s)).matrix();
        tp.accumulate(ia, n.grad.cwiseProduct(d));
    }));
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred.value(), target.value(), "mse");
    double inv_n = 1.0 / static_cast<double>(pred.value().size());
    return scale(l2_norm_sq(sub(pred, target)), inv_n);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    Tape& t = *logits.tape;
    const Mat& z = logits.value();
    if (static_cast<long>(labels.size()) != z.rows())
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + shape_str(z) + " logits");
    int ia = logits.id;
    double loss = 0.0;
    for (long i = 0; i < z.rows(); ++i) {
        double mx = z.row(i).maxCoeff();
        double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
        loss += lse - z(i, labels[i]);
    }
    loss /= static_cast<double>(z.rows());
    std::vector<int> lab = labels;
    return t.wrap(t.emit(Mat::Constant(1, 1, loss), {ia},
                         [ia, lab](Tape& tp, const Tape::Node& n) {
        const Mat& z = tp.node(ia).value;
        Mat dz(z.rows(), z.cols());
        for (long i = 0; i < z.rows(); ++i) {
            double mx = z.row(i).maxCoeff();
            Eigen::ArrayXd e = (z.row(i).array() - mx).exp();
            dz.row(i) = (e / e.sum()).matrix().transpose();
            dz(i, lab[i]) -= 1.0;
        }
        dz *= n.grad(0, 0) / static_cast<double>(z.rows());
        tp.accumulate(ia, dz);
    }));
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.value().cols() != k.value().cols())
        throw DimensionError("attention: q/k dim mismatch " + shape_str(q.value()) +
                             " vs " + shape_str(k.value()));
    if (k.value().rows() != v.value().rows())
        throw DimensionError("attention: k/v row mismatch " + shape_str(k.value()) +
                             " vs " + shape_str(v.value()));
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
    Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
    return matmul(softmax(scores, 1), v);
}

}  // namespace stamina
