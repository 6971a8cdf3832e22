#include "fsrl/nn.hpp"

#include <spdlog/spdlog.h>

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace fsrl::nn {

using nlohmann::json;

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

Tensor activate(const Tensor& x, Activation a) {
    switch (a) {
        case Activation::Tanh: return ad::tanh(x);
        case Activation::Relu: return ad::relu(x);
        case Activation::Identity: return x;
    }
    return x;
}

Linear Linear::init(int in, int out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(in, out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    return {Tensor::parameter(std::move(w)), Tensor::parameter(Matrix::Zero(1, out))};
}

Linear Linear::zeros(int in, int out) {
    return {Tensor::parameter(Matrix::Zero(in, out)), Tensor::parameter(Matrix::Zero(1, out))};
}

Tensor Linear::operator()(const Tensor& x) const { return ad::affine(x, weight, bias); }

Mlp Mlp::init(const std::vector<int>& widths, Rng& rng, Activation hidden) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
    Mlp m;
    m.hidden = hidden;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) m.layers.push_back(Linear::init(widths[i], widths[i + 1], rng));
    return m;
}

Tensor Mlp::operator()(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i](h);
        if (i + 1 < layers.size()) h = activate(h, hidden);
    }
    return h;
}

GraphBatch GraphBatch::from(const std::vector<FeatureGraph>& graphs) {
    GraphBatch b;
    b.graphs = static_cast<int>(graphs.size());
    int nodes = 0, edges = 0;
    for (const auto& g : graphs) {
        nodes += g.num_nodes;
        edges += g.num_edges();
    }
    b.node_features.resize(nodes, FeatureGraph::kNodeFeatures);
    b.edge_features.resize(edges, FeatureGraph::kEdgeFeatures);
    b.source.reserve(edges);
    b.target.reserve(edges);
    b.node_graph.reserve(nodes);
    int node_off = 0, edge_off = 0;
    for (int gi = 0; gi < b.graphs; ++gi) {
        const auto& g = graphs[gi];
        b.offset.push_back(node_off);
        for (int i = 0; i < g.num_nodes; ++i) {
            for (int f = 0; f < FeatureGraph::kNodeFeatures; ++f) {
                b.node_features(node_off + i, f) = g.node_features[i * FeatureGraph::kNodeFeatures + f];
            }
            b.node_graph.push_back(gi);
        }
        for (int e = 0; e < g.num_edges(); ++e) {
            for (int f = 0; f < FeatureGraph::kEdgeFeatures; ++f) {
                b.edge_features(edge_off + e, f) = g.edge_features[e * FeatureGraph::kEdgeFeatures + f];
            }
            b.source.push_back(node_off + g.edge_source[e]);
            b.target.push_back(node_off + g.edge_target[e]);
        }
        node_off += g.num_nodes;
        edge_off += g.num_edges();
    }
    return b;
}

GcnLayer GcnLayer::init(int in, int out, int edge_features, int message_hidden, Rng& rng, Activation hidden,
                        Activation output) {
    GcnLayer l;
    l.message = Mlp::init({in + edge_features, message_hidden, in}, rng, hidden);
    l.update = Linear::init(2 * in, out, rng);
    l.output = output;
    return l;
}

Tensor GcnLayer::operator()(const Tensor& h, const GraphBatch& g) const {
    const int n = g.num_nodes();
    // Edge messages and self-messages go through the message MLP together.
    std::vector<int> rows(g.source);
    std::vector<int> dest(g.target);
    for (int v = 0; v < n; ++v) {
        rows.push_back(v);
        dest.push_back(v);
    }
    Matrix edge_in = Matrix::Zero(static_cast<Index>(rows.size()), g.edge_features.cols());
    edge_in.topRows(g.num_edges()) = g.edge_features;
    Tensor inputs = ad::hcat({ad::gather_rows(h, rows), Tensor::constant(std::move(edge_in))});
    Tensor aggregated = ad::segment_sum(message(inputs), dest, n);
    return activate(update(ad::hcat({h, aggregated})), output);
}

Tensor gcn_forward(const GcnLayer& layer, Tensor h, const GraphBatch& g, int steps) {
    for (int s = 0; s < steps; ++s) h = layer(h, g);
    return h;
}

Tensor sum_pool(const Tensor& h, const GraphBatch& g) { return ad::segment_sum(h, g.node_graph, g.graphs); }

double beta_log_prob(double alpha, double beta, double v) {
    v = std::clamp(v, kBetaEdge, 1.0 - kBetaEdge);
    const double log_b = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
    return (alpha - 1.0) * std::log(v) + (beta - 1.0) * std::log1p(-v) - log_b;
}

double beta_entropy(double alpha, double beta) {
    using boost::math::digamma;
    const double log_b = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
    return log_b - (alpha - 1.0) * digamma(alpha) - (beta - 1.0) * digamma(beta) +
           (alpha + beta - 2.0) * digamma(alpha + beta);
}

double beta_sample(double alpha, double beta, Rng& rng) {
    std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double v = x + y > 0.0 ? x / (x + y) : 0.5;
    return std::clamp(v, kBetaEdge, 1.0 - kBetaEdge);
}

Tensor beta_log_prob(const Tensor& alpha, const Tensor& beta, const Matrix& v) {
    Matrix lv = v.unaryExpr([](double x) { return std::log(std::clamp(x, kBetaEdge, 1.0 - kBetaEdge)); });
    Matrix l1v = v.unaryExpr([](double x) { return std::log1p(-std::clamp(x, kBetaEdge, 1.0 - kBetaEdge)); });
    Tensor log_b = ad::sub(ad::add(ad::lgamma(alpha), ad::lgamma(beta)), ad::lgamma(ad::add(alpha, beta)));
    Tensor a_term = ad::mul(ad::add_scalar(alpha, -1.0), Tensor::constant(std::move(lv)));
    Tensor b_term = ad::mul(ad::add_scalar(beta, -1.0), Tensor::constant(std::move(l1v)));
    return ad::sub(ad::add(a_term, b_term), log_b);
}

Tensor beta_entropy(const Tensor& alpha, const Tensor& beta) {
    Tensor ab = ad::add(alpha, beta);
    Tensor log_b = ad::sub(ad::add(ad::lgamma(alpha), ad::lgamma(beta)), ad::lgamma(ab));
    Tensor ta = ad::mul(ad::add_scalar(alpha, -1.0), ad::digamma(alpha));
    Tensor tb = ad::mul(ad::add_scalar(beta, -1.0), ad::digamma(beta));
    Tensor tab = ad::mul(ad::add_scalar(ab, -2.0), ad::digamma(ab));
    return ad::add(ad::sub(ad::sub(log_b, ta), tb), tab);
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (r < acc) return static_cast<int>(i);
    }
    // Rounding left r above the total: take the last option with mass.
    for (std::size_t i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) return static_cast<int>(i);
    }
    return 0;
}

void ParameterSet::add(const std::string& name, const Tensor& t) {
    for (const auto& [n, _] : entries_) {
        if (n == name) throw std::invalid_argument("duplicate parameter name " + name);
    }
    entries_.emplace_back(name, t);
}

void ParameterSet::add(const std::string& prefix, const Linear& l) {
    add(prefix + ".weight", l.weight);
    add(prefix + ".bias", l.bias);
}

void ParameterSet::add(const std::string& prefix, const Mlp& m) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) add(prefix + "." + std::to_string(i), m.layers[i]);
}

void ParameterSet::add(const std::string& prefix, const GcnLayer& g) {
    add(prefix + ".message", g.message);
    add(prefix + ".update", g.update);
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += static_cast<std::size_t>(t.value().size());
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& [_, t] : entries_) t.zero_grad();
}

namespace {

constexpr const char* kCheckpointFormat = "fsrl-checkpoint";
constexpr int kCheckpointVersion = 1;

std::pair<std::string, std::string> split_name(const std::string& name) {
    const auto slash = name.find('/');
    if (slash == std::string::npos) return {"default", name};
    return {name.substr(0, slash), name.substr(slash + 1)};
}

}  // namespace

std::string ParameterSet::to_json() const {
    json groups = json::object();
    for (const auto& [name, t] : entries_) {
        auto [group, param] = split_name(name);
        const Matrix& v = t.value();
        groups[group][param] = {{"rows", v.rows()},
                                {"cols", v.cols()},
                                {"data", std::vector<double>(v.data(), v.data() + v.size())}};
    }
    json j = {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"groups", groups}};
    return j.dump();
}

void ParameterSet::load_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("checkpoint parse error: ") + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat) throw std::runtime_error("not a checkpoint file");
    if (j.value("version", 0) != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
    }
    const json& groups = j.at("groups");
    std::size_t found = 0;
    for (auto& [name, t] : entries_) {
        auto [group, param] = split_name(name);
        if (!groups.contains(group) || !groups[group].contains(param)) {
            throw std::runtime_error("checkpoint lacks parameter " + name);
        }
        const json& p = groups[group][param];
        const auto rows = p.at("rows").get<Index>();
        const auto cols = p.at("cols").get<Index>();
        const auto data = p.at("data").get<std::vector<double>>();
        if (rows != t.rows() || cols != t.cols() || static_cast<Index>(data.size()) != rows * cols) {
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        }
        std::copy(data.begin(), data.end(), t.mutable_value().data());
        ++found;
    }
    std::size_t stored = 0;
    for (const auto& g : groups) stored += g.size();
    if (stored != found) throw std::runtime_error("checkpoint has parameters this model does not know");
}

Adam::Adam(const ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [_, t] : params.entries()) {
        params_.push_back(t);
        m_.push_back(Matrix::Zero(t.rows(), t.cols()));
        v_.push_back(Matrix::Zero(t.rows(), t.cols()));
    }
}

bool Adam::step() {
    std::vector<Matrix> grads;
    grads.reserve(params_.size());
    for (const auto& p : params_) {
        grads.push_back(p.grad());
        if (!grads.back().allFinite()) {
            spdlog::warn("adam: non-finite gradient, update skipped");
            return false;
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
        Matrix& w = params_[i].mutable_value();
        w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
    return true;
}

}  // namespace fsrl::nn
