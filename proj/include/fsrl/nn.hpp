#pragma once

// Neural building blocks on top of the autodiff engine: dense layers, an
// edge-conditioned graph convolution, pooling, the Beta distribution head,
// Adam and parameter checkpoints.

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fsrl/flowsheet.hpp"
#include "fsrl/tensor.hpp"

namespace fsrl::nn {

using ad::Index;
using ad::Matrix;
using ad::Tensor;
using Rng = std::mt19937_64;

enum class Activation { Tanh, Relu, Identity };
Activation activation_from_string(const std::string& name);
Tensor activate(const Tensor& x, Activation a);

struct Linear {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out

    // Glorot-uniform weights, zero bias.
    static Linear init(int in, int out, Rng& rng);
    static Linear zeros(int in, int out);
    Tensor operator()(const Tensor& x) const;
    int in() const { return static_cast<int>(weight.rows()); }
    int out() const { return static_cast<int>(weight.cols()); }
};

// Affine layers with `hidden` activation between them and a linear output.
struct Mlp {
    std::vector<Linear> layers;
    Activation hidden = Activation::Tanh;

    static Mlp init(const std::vector<int>& widths, Rng& rng, Activation hidden = Activation::Tanh);
    Tensor operator()(const Tensor& x) const;
};

// Several flowsheet graphs packed as one disjoint union.
struct GraphBatch {
    Matrix node_features;  // N x F
    Matrix edge_features;  // M x E
    std::vector<int> source, target;
    std::vector<int> node_graph;  // graph index of every node
    std::vector<int> offset;      // first node row of every graph
    int graphs = 0;

    static GraphBatch from(const std::vector<FeatureGraph>& graphs);
    int num_nodes() const { return static_cast<int>(node_features.rows()); }
    int num_edges() const { return static_cast<int>(source.size()); }
};

// One message-passing step. Node v receives M(h_u ++ e_uv) from every
// in-neighbour u plus a self-message M(h_v ++ 0); the summed messages update
// the node: h_v <- act(U(h_v ++ m_v)).
struct GcnLayer {
    Mlp message;   // (in + E) -> hidden -> in
    Linear update;  // 2 in -> out
    Activation output = Activation::Tanh;

    static GcnLayer init(int in, int out, int edge_features, int message_hidden, Rng& rng, Activation hidden,
                         Activation output);
    Tensor operator()(const Tensor& h, const GraphBatch& g) const;
};

// Applies the same layer `steps` times.
Tensor gcn_forward(const GcnLayer& layer, Tensor h, const GraphBatch& g, int steps);
// Per-graph sum of node rows: graphs x width.
Tensor sum_pool(const Tensor& h, const GraphBatch& g);

// Beta(alpha, beta) density on (0, 1). Tensor versions take column vectors.
inline constexpr double kBetaEdge = 1e-6;
double beta_log_prob(double alpha, double beta, double v);
double beta_entropy(double alpha, double beta);
double beta_sample(double alpha, double beta, Rng& rng);
Tensor beta_log_prob(const Tensor& alpha, const Tensor& beta, const Matrix& v);
Tensor beta_entropy(const Tensor& alpha, const Tensor& beta);

// Categorical draw from probabilities summing to one.
int sample_categorical(const std::vector<double>& probs, Rng& rng);

// Named learnable tensors; names are "group/parameter".
class ParameterSet {
public:
    void add(const std::string& name, const Tensor& t);
    void add(const std::string& prefix, const Linear& l);
    void add(const std::string& prefix, const Mlp& m);
    void add(const std::string& prefix, const GcnLayer& g);

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;
    void zero_grad();

    // Versioned JSON checkpoint, parameters grouped by name prefix.
    std::string to_json() const;
    // Overwrites values in place; names and shapes must match.
    void load_json(const std::string& text);

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

class Adam {
public:
    Adam(const ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // Returns false (and leaves everything untouched) if any gradient is
    // non-finite.
    bool step();
    void set_learning_rate(double lr) { lr_ = lr; }
    long steps() const { return t_; }
    const std::vector<Matrix>& first_moment() const { return m_; }
    const std::vector<Matrix>& second_moment() const { return v_; }

private:
    std::vector<Tensor> params_;
    std::vector<Matrix> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace fsrl::nn
