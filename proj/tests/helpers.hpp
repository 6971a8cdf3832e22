#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fsrl/env.hpp"
#include "fsrl/tensor.hpp"

namespace fsrl::testing {

inline Stream make_stream(double t, double flow, std::array<double, kNumComponents> x) {
    Stream s;
    s.temperature_c = t;
    s.flow = flow;
    s.x.x = x;
    return s;
}

inline Stream default_feed() { return make_stream(27.0, 100.0, {0.0, 0.5, 0.5, 0.0}); }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// A uniformly random composition on the simplex.
inline Composition random_composition(std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Composition c;
    double s = 0.0;
    for (double& v : c.x) s += (v = e(rng));
    for (double& v : c.x) v /= s;
    return c;
}

// Plays uniformly random legal actions until the episode ends. Product is
// drawn with probability `p_product` so flowsheets grow to useful sizes.
struct RandomEpisode {
    StepResult last;
    std::vector<ActionTriple> actions;
};

inline RandomEpisode random_episode(FlowsheetEnv& env, std::mt19937_64& rng, double p_product = 0.15) {
    RandomEpisode ep;
    FlowsheetGraph g = env.reset();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (true) {
        const auto open = g.open_streams();
        ActionTriple a;
        a.location = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
        if (u(rng) < p_product) {
            a.unit = UnitKind::Product;
        } else {
            a.unit = kActionUnits[std::uniform_int_distribution<int>(0, 3)(rng)];
            a.design = u(rng);
        }
        ep.actions.push_back(a);
        ep.last = env.step(a);
        if (ep.last.done) return ep;
        g = ep.last.state;
    }
}

// Largest per-component imbalance of feed + reaction - products, relative
// to the feed flow. Reaction extents are read off each reactor's MeOAc gain.
inline double component_imbalance(const FlowsheetGraph& g) {
    std::array<double, kNumComponents> balance{};
    for (std::size_t i = 0; i < kNumComponents; ++i) balance[i] = g.feed().component_flow(i);
    constexpr std::array<double, kNumComponents> nu{1.0, -1.0, -1.0, 1.0};
    for (const auto& n : g.nodes()) {
        if (n.kind == UnitKind::Reactor) {
            const Stream& in = g.edges()[g.inlet_edge(n.id)].stream;
            const Stream& out = g.edges()[g.outlet_edges(n.id).at(0)].stream;
            const double extent = out.component_flow(kMeOAc) - in.component_flow(kMeOAc);
            for (std::size_t i = 0; i < kNumComponents; ++i) balance[i] += nu[i] * extent;
        } else if (n.kind == UnitKind::Product || n.kind == UnitKind::Undefined) {
            const Stream& in = g.edges()[g.inlet_edge(n.id)].stream;
            for (std::size_t i = 0; i < kNumComponents; ++i) balance[i] -= in.component_flow(i);
        }
    }
    double worst = 0.0;
    const double scale = std::max(g.feed().flow, 1e-12);
    for (double b : balance) worst = std::max(worst, std::abs(b) / scale);
    return worst;
}

// Central-difference check of d(scalar f)/d(each input entry) against
// reverse mode. Returns the worst error, relative with an absolute floor.
inline double gradient_check(const std::function<ad::Tensor(const std::vector<ad::Tensor>&)>& f,
                             std::vector<ad::Tensor> inputs, double h = 1e-5, double floor = 1e-4) {
    for (auto& t : inputs) t.zero_grad();
    ad::Tensor out = f(inputs);
    out.backward();
    std::vector<ad::Matrix> analytic;
    for (auto& t : inputs) analytic.push_back(t.grad());
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (!inputs[k].requires_grad()) continue;
        ad::Matrix& v = inputs[k].mutable_value();
        for (ad::Index i = 0; i < v.size(); ++i) {
            const double saved = v.data()[i];
            v.data()[i] = saved + h;
            const double fp = f(inputs).item();
            v.data()[i] = saved - h;
            const double fm = f(inputs).item();
            v.data()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[k].data()[i];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace fsrl::testing
