#include "fsrl/tensor.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>


namespace fsrl::ad {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Tensor::Node>;

bool any_requires_grad(const std::vector<Tensor>& parents) {
    for (const auto& p : parents) {
        if (p.requires_grad()) return true;
    }
    return false;
}

// Wraps a computed value; records parents and the backward closure only when
// some parent needs a gradient and recording is on.
Tensor make(Matrix value, const std::vector<Tensor>& parents, std::function<void(Tensor::Node&)> backward) {
    auto n = std::make_shared<Tensor::Node>();
    n->value = std::move(value);
    if (g_grad_enabled && any_requires_grad(parents)) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

// Element-wise unary op given value map and local derivative (from x and y).
template <class F, class D>
Tensor unary(const Tensor& a, F f, D dfdx) {
    Matrix y = a.value().unaryExpr(f);
    return make(std::move(y), {a}, [dfdx](Tensor::Node& self) {
        auto& x = self.parents[0];
        if (!x->requires_grad) return;
        Matrix& gx = x->grad_buffer();
        for (Index i = 0; i < self.value.size(); ++i) {
            gx.data()[i] += self.grad.data()[i] * dfdx(x->value.data()[i], self.value.data()[i]);
        }
    });
}

}  // namespace

Matrix& Tensor::Node::grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
}

Tensor Tensor::constant(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

Matrix Tensor::grad() const {
    if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
    return node_->grad;
}

double Tensor::item() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("item() needs a 1x1 tensor");
    return node_->value(0, 0);
}

void Tensor::backward() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("backward() needs a scalar (1x1) tensor");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && !p->parents.empty() && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->grad_buffer()(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
    // Intermediate gradients are not needed once propagated.
    for (Node* n : order) {
        if (n != node_.get()) n->grad.resize(0, 0);
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.rows()));
    }
    Matrix c(a.rows(), b.cols());
    c.noalias() = a.value() * b.value();
    return make(std::move(c), {a, b}, [](Tensor::Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) pa->grad_buffer().noalias() += self.grad * pb->value.transpose();
        if (pb->requires_grad) pb->grad_buffer().noalias() += pa->value.transpose() * self.grad;
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    return make(a.value() + b.value(), {a, b}, [](Tensor::Node& self) {
        for (auto& p : self.parents) {
            if (p->requires_grad) p->grad_buffer() += self.grad;
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    return make(a.value() - b.value(), {a, b}, [](Tensor::Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
        if (self.parents[1]->requires_grad) self.parents[1]->grad_buffer() -= self.grad;
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    return make(a.value().cwiseProduct(b.value()), {a, b}, [](Tensor::Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) pa->grad_buffer() += self.grad.cwiseProduct(pb->value);
        if (pb->requires_grad) pb->grad_buffer() += self.grad.cwiseProduct(pa->value);
    });
}

Tensor scale(const Tensor& a, double s) {
    return make(a.value() * s, {a}, [s](Tensor::Node& self) { self.parents[0]->grad_buffer() += s * self.grad; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return make(a.value().array() + s, {a}, [](Tensor::Node& self) { self.parents[0]->grad_buffer() += self.grad; });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.cols() != w.rows()) {
        throw ShapeError("affine: inner dimensions " + std::to_string(x.cols()) + " and " + std::to_string(w.rows()));
    }
    if (bias.rows() != 1 || bias.cols() != w.cols()) throw ShapeError("affine: bias must be 1 x cols(w)");
    Matrix y(x.rows(), w.cols());
    y.rowwise() = bias.value().row(0);
    y.noalias() += x.value() * w.value();
    return make(std::move(y), {x, w, bias}, [](Tensor::Node& self) {
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        auto& pb = self.parents[2];
        if (px->requires_grad) px->grad_buffer().noalias() += self.grad * pw->value.transpose();
        if (pw->requires_grad) pw->grad_buffer().noalias() += px->value.transpose() * self.grad;
        if (pb->requires_grad) pb->grad_buffer() += self.grad.colwise().sum();
    });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row must be 1 x cols(a)");
    Matrix y = a.value();
    y.rowwise() += row.value().row(0);
    return make(std::move(y), {a, row}, [](Tensor::Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
        if (self.parents[1]->requires_grad) self.parents[1]->grad_buffer() += self.grad.colwise().sum();
    });
}

Tensor tanh(const Tensor& a) {
    // Through exp: much cheaper than std::tanh at the same absolute accuracy.
    auto f = [](double x) {
        const double e = std::exp(-2.0 * std::abs(x));
        return std::copysign((1.0 - e) / (1.0 + e), x);
    };
    return unary(a, f, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
    return unary(
        a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor square(const Tensor& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor lgamma(const Tensor& a) {
    return unary(a, [](double x) { return std::lgamma(x); }, [](double x, double) { return boost::math::digamma(x); });
}

Tensor digamma(const Tensor& a) {
    return unary(
        a, [](double x) { return boost::math::digamma(x); }, [](double x, double) { return boost::math::trigamma(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "minimum");
    return make(a.value().cwiseMin(b.value()), {a, b}, [](Tensor::Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        for (Index i = 0; i < self.value.size(); ++i) {
            const bool take_a = pa->value.data()[i] <= pb->value.data()[i];
            auto& target = take_a ? pa : pb;
            if (target->requires_grad) target->grad_buffer().data()[i] += self.grad.data()[i];
        }
    });
}

Tensor hcat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("hcat: no inputs");
    const Index rows = parts[0].rows();
    Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ShapeError("hcat: row count mismatch");
        cols += p.cols();
    }
    Matrix y(rows, cols);
    Index off = 0;
    for (const auto& p : parts) {
        y.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    return make(std::move(y), parts, [](Tensor::Node& self) {
        Index off = 0;
        for (auto& p : self.parents) {
            const Index c = p->value.cols();
            if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(off, c);
            off += c;
        }
    });
}

Tensor vcat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("vcat: no inputs");
    const Index cols = parts[0].cols();
    Index rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ShapeError("vcat: column count mismatch");
        rows += p.rows();
    }
    Matrix y(rows, cols);
    Index off = 0;
    for (const auto& p : parts) {
        y.middleRows(off, p.rows()) = p.value();
        off += p.rows();
    }
    return make(std::move(y), parts, [](Tensor::Node& self) {
        Index off = 0;
        for (auto& p : self.parents) {
            const Index r = p->value.rows();
            if (p->requires_grad) p->grad_buffer() += self.grad.middleRows(off, r);
            off += r;
        }
    });
}

Tensor col(const Tensor& a, Index j) {
    if (j < 0 || j >= a.cols()) throw ShapeError("col: index out of range");
    return make(a.value().col(j), {a}, [j](Tensor::Node& self) { self.parents[0]->grad_buffer().col(j) += self.grad; });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& index) {
    Matrix y(static_cast<Index>(index.size()), a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
        y.row(static_cast<Index>(i)) = a.value().row(index[i]);
    }
    return make(std::move(y), {a}, [index](Tensor::Node& self) {
        Matrix& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += self.grad.row(static_cast<Index>(i));
    });
}

Tensor segment_sum(const Tensor& a, const std::vector<int>& segment, int segments) {
    if (static_cast<Index>(segment.size()) != a.rows()) throw ShapeError("segment_sum: one segment id per row");
    Matrix y = Matrix::Zero(segments, a.cols());
    for (std::size_t i = 0; i < segment.size(); ++i) {
        if (segment[i] < 0 || segment[i] >= segments) throw ShapeError("segment_sum: segment id out of range");
        y.row(segment[i]) += a.value().row(static_cast<Index>(i));
    }
    return make(std::move(y), {a}, [segment](Tensor::Node& self) {
        Matrix& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < segment.size(); ++i) g.row(static_cast<Index>(i)) += self.grad.row(segment[i]);
    });
}

Tensor sum(const Tensor& a) {
    return make(Matrix::Constant(1, 1, a.value().sum()), {a},
                [](Tensor::Node& self) { self.parents[0]->grad_buffer().array() += self.grad(0, 0); });
}

Tensor mean(const Tensor& a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw ShapeError("mean: empty tensor");
    return make(Matrix::Constant(1, 1, a.value().sum() / n), {a},
                [n](Tensor::Node& self) { self.parents[0]->grad_buffer().array() += self.grad(0, 0) / n; });
}

Tensor row_sum(const Tensor& a) {
    return make(a.value().rowwise().sum(), {a}, [](Tensor::Node& self) {
        Matrix& g = self.parents[0]->grad_buffer();
        g.colwise() += self.grad.col(0);
    });
}

Tensor log_softmax_rows(const Tensor& a) {
    Matrix y = a.value();
    for (Index i = 0; i < y.rows(); ++i) {
        const double mx = y.row(i).maxCoeff();
        const double lse = mx + std::log((y.row(i).array() - mx).exp().sum());
        y.row(i).array() -= lse;
    }
    return make(std::move(y), {a}, [](Tensor::Node& self) {
        Matrix& g = self.parents[0]->grad_buffer();
        for (Index i = 0; i < self.value.rows(); ++i) {
            const double gs = self.grad.row(i).sum();
            g.row(i).array() += self.grad.row(i).array() - self.value.row(i).array().exp() * gs;
        }
    });
}

Tensor segment_log_softmax(const Tensor& a, const std::vector<int>& segment, int segments) {
    if (a.cols() != 1 || static_cast<Index>(segment.size()) != a.rows()) {
        throw ShapeError("segment_log_softmax: needs a column vector with one segment id per row");
    }
    std::vector<double> mx(segments, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < segment.size(); ++i) {
        if (segment[i] < 0 || segment[i] >= segments) throw ShapeError("segment_log_softmax: segment id out of range");
        mx[segment[i]] = std::max(mx[segment[i]], a.value()(static_cast<Index>(i), 0));
    }
    std::vector<double> z(segments, 0.0);
    for (std::size_t i = 0; i < segment.size(); ++i) z[segment[i]] += std::exp(a.value()(static_cast<Index>(i), 0) - mx[segment[i]]);
    Matrix y(a.rows(), 1);
    for (std::size_t i = 0; i < segment.size(); ++i) {
        const auto r = static_cast<Index>(i);
        y(r, 0) = a.value()(r, 0) - mx[segment[i]] - std::log(z[segment[i]]);
    }
    return make(std::move(y), {a}, [segment, segments](Tensor::Node& self) {
        std::vector<double> gs(segments, 0.0);
        for (std::size_t i = 0; i < segment.size(); ++i) gs[segment[i]] += self.grad(static_cast<Index>(i), 0);
        Matrix& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < segment.size(); ++i) {
            const auto r = static_cast<Index>(i);
            g(r, 0) += self.grad(r, 0) - std::exp(self.value(r, 0)) * gs[segment[i]];
        }
    });
}

}  // namespace fsrl::ad
