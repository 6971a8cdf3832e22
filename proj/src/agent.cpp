#include "fsrl/agent.hpp"

#include <cmath>
#include <stdexcept>

namespace fsrl {

using nn::Matrix;
using nn::Tensor;

Agent::Agent(const Config& cfg, std::uint64_t seed)
    : cfg_(cfg.agent), limits_(DesignLimits::from(cfg)), features_(cfg.features),
      act_(nn::activation_from_string(cfg.agent.activation)) {
    nn::Rng rng(seed);
    const int d = cfg_.node_embedding;
    const int edge = FeatureGraph::kEdgeFeatures;
    const int head_in = cfg_.fingerprint + cfg_.location_capacity;

    input_ = nn::Linear::init(FeatureGraph::kNodeFeatures, d, rng);
    message_passing_ = nn::GcnLayer::init(d, d, edge, cfg_.message_hidden, rng, act_, act_);
    pool_ = nn::Linear::init(d, cfg_.fingerprint, rng);
    level1_hidden_ = nn::GcnLayer::init(d, cfg_.level1_hidden, edge, cfg_.message_hidden, rng, act_, act_);
    level1_out_ = nn::GcnLayer::init(cfg_.level1_hidden, 1, edge, cfg_.message_hidden, rng, act_,
                                     nn::Activation::Identity);
    level2_ = nn::Mlp::init({head_in, cfg_.level2_hidden, kNumUnitChoices}, rng, act_);
    for (auto& head : level3_) head = nn::Mlp::init({head_in, cfg_.level3_hidden, 2}, rng, act_);
    critic_ = nn::Mlp::init({cfg_.fingerprint, cfg_.critic_hidden, 1}, rng, act_);

    params_.add("fingerprint/input", input_);
    params_.add("fingerprint/gcn", message_passing_);
    params_.add("fingerprint/pool", pool_);
    params_.add("level1/gcn0", level1_hidden_);
    params_.add("level1/gcn1", level1_out_);
    params_.add("level2/mlp", level2_);
    const char* heads[kNumDesignHeads] = {"reactor", "heat_exchanger", "column", "splitter"};
    for (int k = 0; k < kNumDesignHeads; ++k) params_.add(std::string("level3/") + heads[k], level3_[k]);
    params_.add("critic/mlp", critic_);
}

Encoding Agent::encode(const std::vector<const FlowsheetGraph*>& states) const {
    std::vector<FeatureGraph> graphs;
    graphs.reserve(states.size());
    for (const auto* g : states) graphs.push_back(g->to_feature_graph(limits_, features_));
    Encoding enc;
    enc.batch = nn::GraphBatch::from(graphs);
    Tensor h = nn::activate(input_(Tensor::constant(enc.batch.node_features)), act_);
    enc.nodes = nn::gcn_forward(message_passing_, h, enc.batch, cfg_.message_steps);
    enc.fingerprint = pool_(nn::sum_pool(enc.nodes, enc.batch));
    return enc;
}

Tensor Agent::location_one_hot(const std::vector<int>& location_index) const {
    Matrix m = Matrix::Zero(static_cast<nn::Index>(location_index.size()), cfg_.location_capacity);
    for (std::size_t i = 0; i < location_index.size(); ++i) {
        if (location_index[i] < 0 || location_index[i] >= cfg_.location_capacity) {
            throw std::out_of_range("location index exceeds the one-hot capacity");
        }
        m(static_cast<nn::Index>(i), location_index[i]) = 1.0;
    }
    return Tensor::constant(std::move(m));
}

Tensor Agent::location_log_probs(const Encoding& enc, const std::vector<const FlowsheetGraph*>& states) const {
    Tensor scores = level1_out_(level1_hidden_(enc.nodes, enc.batch), enc.batch);
    std::vector<int> rows, segment;
    for (std::size_t s = 0; s < states.size(); ++s) {
        const auto open = states[s]->open_streams();
        if (open.empty()) throw std::invalid_argument("state has no open streams");
        for (int id : open) {
            rows.push_back(enc.batch.offset[s] + id);
            segment.push_back(static_cast<int>(s));
        }
    }
    return ad::segment_log_softmax(ad::gather_rows(scores, rows), segment, static_cast<int>(states.size()));
}

Tensor Agent::unit_log_probs(const Tensor& fingerprint, const std::vector<int>& location_index) const {
    return ad::log_softmax_rows(level2_(ad::hcat({fingerprint, location_one_hot(location_index)})));
}

std::pair<Tensor, Tensor> Agent::design_params(int head, const Tensor& fingerprint,
                                               const std::vector<int>& location_index) const {
    Tensor raw = level3_.at(head)(ad::hcat({fingerprint, location_one_hot(location_index)}));
    Tensor ab = ad::add_scalar(ad::softplus(raw), 1.0);
    return {ad::col(ab, 0), ad::col(ab, 1)};
}

Tensor Agent::value(const Tensor& fingerprint) const { return critic_(fingerprint); }

double Agent::physical_design(int unit, double unit_value) const {
    return limits_.range(kActionUnits.at(unit)).scale(unit_value);
}

AgentOutput Agent::act(const FlowsheetGraph& g, nn::Rng& rng, const Controls& controls) const {
    ad::NoGradGuard no_grad;
    AgentOutput out;
    const auto open = g.open_streams();
    if (open.empty()) throw std::invalid_argument("act: no open streams");
    const std::vector<const FlowsheetGraph*> states{&g};
    const Encoding enc = encode(states);

    if (controls.location_index) {
        out.decision.location_index = *controls.location_index;
        if (out.decision.location_index < 0 || out.decision.location_index >= static_cast<int>(open.size())) {
            throw std::out_of_range("forced location is not an open stream");
        }
    } else {
        const Matrix lp = location_log_probs(enc, states).value();
        std::vector<double> p(lp.size());
        double h = 0.0;
        for (nn::Index i = 0; i < lp.size(); ++i) {
            p[i] = std::exp(lp(i, 0));
            if (p[i] > 0.0) h -= p[i] * lp(i, 0);
        }
        const int k = nn::sample_categorical(p, rng);
        out.decision.location_index = k;
        out.log_prob[0] = lp(k, 0);
        out.entropy[0] = h;
        out.active[0] = true;
    }
    const std::vector<int> loc{out.decision.location_index};

    if (controls.unit) {
        out.decision.unit = *controls.unit;
    } else {
        const Matrix lp = unit_log_probs(enc.fingerprint, loc).value();
        std::vector<double> p(kNumUnitChoices);
        double h = 0.0;
        for (int i = 0; i < kNumUnitChoices; ++i) {
            p[i] = std::exp(lp(0, i));
            if (p[i] > 0.0) h -= p[i] * lp(0, i);
        }
        const int k = nn::sample_categorical(p, rng);
        out.decision.unit = k;
        out.log_prob[1] = lp(0, k);
        out.entropy[1] = h;
        out.active[1] = true;
    }

    out.action.location = open[out.decision.location_index];
    out.action.unit = kActionUnits.at(out.decision.unit);
    if (has_design(out.action.unit)) {
        if (controls.pinned_design) {
            out.action.design = controls.pinned_design->at(out.decision.unit);
            out.action.physical = true;
        } else {
            auto [alpha, beta] = design_params(out.decision.unit, enc.fingerprint, loc);
            const double a = alpha.value()(0, 0);
            const double b = beta.value()(0, 0);
            const double v = nn::beta_sample(a, b, rng);
            out.decision.design = v;
            out.action.design = v;
            out.log_prob[2] = nn::beta_log_prob(a, b, v);
            out.entropy[2] = nn::beta_entropy(a, b);
            out.active[2] = true;
        }
    }
    out.value = value(enc.fingerprint).value()(0, 0);
    return out;
}

double Agent::value(const FlowsheetGraph& g) const {
    ad::NoGradGuard no_grad;
    return value(encode({&g}).fingerprint).value()(0, 0);
}

Evaluation Agent::evaluate(const std::vector<const FlowsheetGraph*>& states,
                           const std::vector<Decision>& decisions) const {
    if (states.size() != decisions.size() || states.empty()) {
        throw std::invalid_argument("evaluate: need one decision per state");
    }
    const int n = static_cast<int>(states.size());
    const Encoding enc = encode(states);

    // Level 1.
    Tensor lp_all = location_log_probs(enc, states);
    std::vector<int> chosen, segment;
    int base = 0;
    for (int s = 0; s < n; ++s) {
        const int count = static_cast<int>(states[s]->open_streams().size());
        if (decisions[s].location_index < 0 || decisions[s].location_index >= count) {
            throw std::invalid_argument("evaluate: stored location is not an open stream");
        }
        chosen.push_back(base + decisions[s].location_index);
        for (int i = 0; i < count; ++i) segment.push_back(s);
        base += count;
    }
    Tensor lp1 = ad::gather_rows(lp_all, chosen);
    Tensor h1 = ad::scale(ad::segment_sum(ad::mul(ad::exp(lp_all), lp_all), segment, n), -1.0);

    // Level 2.
    std::vector<int> loc(n);
    Matrix unit_hot = Matrix::Zero(n, kNumUnitChoices);
    for (int s = 0; s < n; ++s) {
        loc[s] = decisions[s].location_index;
        if (decisions[s].unit < 0 || decisions[s].unit >= kNumUnitChoices) {
            throw std::invalid_argument("evaluate: stored unit index out of range");
        }
        unit_hot(s, decisions[s].unit) = 1.0;
    }
    Tensor lp_units = unit_log_probs(enc.fingerprint, loc);
    Tensor lp2 = ad::row_sum(ad::mul(lp_units, Tensor::constant(std::move(unit_hot))));
    Tensor h2 = ad::scale(ad::row_sum(ad::mul(ad::exp(lp_units), lp_units)), -1.0);

    // Level 3: each head sees only its own rows; Product rows stay 0.
    std::vector<Tensor> lp_parts, h_parts;
    std::vector<int> position(n, -1);
    int stacked = 0;
    for (int head = 0; head < kNumDesignHeads; ++head) {
        std::vector<int> rows;
        for (int s = 0; s < n; ++s) {
            if (decisions[s].unit == head) rows.push_back(s);
        }
        if (rows.empty()) continue;
        std::vector<int> head_loc;
        Matrix v(static_cast<nn::Index>(rows.size()), 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            head_loc.push_back(loc[rows[i]]);
            v(static_cast<nn::Index>(i), 0) = decisions[rows[i]].design;
            position[rows[i]] = stacked++;
        }
        auto [alpha, beta] = design_params(head, ad::gather_rows(enc.fingerprint, rows), head_loc);
        lp_parts.push_back(nn::beta_log_prob(alpha, beta, v));
        h_parts.push_back(nn::beta_entropy(alpha, beta));
    }
    const int zero_row = stacked;
    lp_parts.push_back(Tensor::constant(Matrix::Zero(1, 1)));
    h_parts.push_back(Tensor::constant(Matrix::Zero(1, 1)));
    for (int& p : position) {
        if (p < 0) p = zero_row;
    }
    Tensor lp3 = ad::gather_rows(ad::vcat(lp_parts), position);
    Tensor h3 = ad::gather_rows(ad::vcat(h_parts), position);

    return {ad::hcat({lp1, lp2, lp3}), ad::hcat({h1, h2, h3}), value(enc.fingerprint)};
}

}  // namespace fsrl
