#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stamina {

// All math is dense row-major float64.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Mat& m) {
    return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

class Tape;

// Lightweight handle into a Tape. Copyable, valid while the tape lives.
struct Tensor {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    const Mat& grad() const;
    long rows() const { return value().rows(); }
    long cols() const { return value().cols(); }
};

// Reverse-mode tape. One tape per training step, single-threaded.
// Nodes are appended in evaluation order, so a single reverse sweep
// visits every node after all of its consumers.
class Tape {
public:
    struct Node {
        Mat value;
        Mat grad;                           // allocated lazily on backward
        bool requires_grad = false;
        std::vector<int> parents;
        std::function<void(Tape&, const Node&)> back;  // scatter node.grad into parents
    };

    int leaf(Mat value, bool requires_grad) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int constant(Mat value) { return leaf(std::move(value), false); }

    int emit(Mat value, std::vector<int> parents,
             std::function<void(Tape&, const Node&)> back) {
        Node n;
        n.value = std::move(value);
        for (int p : parents)
            n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
        n.parents = std::move(parents);
        if (n.requires_grad) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    Node& node(int id) { return nodes_[id]; }
    const Node& node(int id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    Tensor wrap(int id) { return Tensor{this, id}; }

    // Accumulate into a parent's grad, allocating it on first touch.
    void accumulate(int id, const Mat& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.grad += g;
    }

    // Seeds d(root)/d(root) = 1 and sweeps the tape once in reverse.
    void backward(const Tensor& root);

private:
    std::vector<Node> nodes_;
};

inline const Mat& Tensor::value() const { return tape->node(id).value; }
inline const Mat& Tensor::grad() const { return tape->node(id).grad; }

// --- op surface ---------------------------------------------------------

Tensor make_leaf(Tape& t, Mat value, bool requires_grad = true);
Tensor make_constant(Tape& t, Mat value);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// axis = 0: softmax down each column; axis = 1: softmax along each row.
Tensor softmax(const Tensor& a, int axis);

Tensor sum(const Tensor& a);        // 1x1
Tensor l1_sum(const Tensor& a);     // sum |x|, 1x1
Tensor l2_norm_sq(const Tensor& a); // sum x^2, 1x1

Tensor concat_rows(const Tensor& a, const Tensor& b);

// From a 1x(D1*D2*2) row vector laid out row-major over [D1,D2,2],
// extract channel 0 or 1 as a D1xD2 matrix.
Tensor channel_split(const Tensor& flat, long d1, long d2, int channel);

// Forward: 1 where x > 0 else 0. Backward: sigmoid'(x) (straight-through
// against the soft two-way softmax value sigmoid(x)).
Tensor hard_threshold_st(const Tensor& x);

// Mean squared error over all entries, 1x1.
Tensor mse(const Tensor& pred, const Tensor& target);

// Row-wise cross-entropy from unnormalized logits [B x C]; mean over rows.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Single-head attention: softmax(q k^T / sqrt(d)) v.
// q: [nq x d], k: [nk x d], v: [nk x dv].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

}  // namespace stamina
