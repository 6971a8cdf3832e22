#pragma once

// Tape-free reverse-mode automatic differentiation over dense matrices.
// Each Tensor owns a node holding its value, its gradient and a closure that
// pushes the gradient to its parents. Nodes are reference counted, so the
// graph lives exactly as long as some Tensor refers to its output.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace fsrl::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Tensor {
public:
    struct Node {
        Matrix value;
        Matrix grad;  // empty until something flows into it
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;

        Matrix& grad_buffer();
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor constant(Matrix value);
    static Tensor parameter(Matrix value);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    // Zero matrix of the value's shape when no gradient has arrived.
    Matrix grad() const;
    Matrix& grad_buffer() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.resize(0, 0); }
    bool requires_grad() const { return node_->requires_grad; }
    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    double item() const;

    // Seeds d(this)/d(this) = 1 for a 1x1 tensor and propagates.
    void backward() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive (rollouts, evaluation).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};
bool grad_enabled();

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);  // x w + bias (1 x n, broadcast)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // element-wise
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor add_row(const Tensor& a, const Tensor& row);  // broadcast a 1 x n row over a

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor lgamma(const Tensor& a);
Tensor digamma(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor hcat(const std::vector<Tensor>& parts);
Tensor vcat(const std::vector<Tensor>& parts);
Tensor col(const Tensor& a, Index j);
Tensor gather_rows(const Tensor& a, const std::vector<int>& index);
// Row s of the result is the sum of the rows i of `a` with segment[i] == s.
Tensor segment_sum(const Tensor& a, const std::vector<int>& segment, int segments);

Tensor sum(const Tensor& a);   // 1 x 1
Tensor mean(const Tensor& a);  // 1 x 1
Tensor row_sum(const Tensor& a);  // m x 1
Tensor log_softmax_rows(const Tensor& a);
// Log-softmax of a column vector within each segment.
Tensor segment_log_softmax(const Tensor& a, const std::vector<int>& segment, int segments);

}  // namespace fsrl::ad
