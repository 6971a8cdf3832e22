#include "fsrl/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace fsrl {

namespace {

constexpr std::size_t kVarsPerStream = kNumComponents + 1;

bool converged(const std::vector<double>& x, const std::vector<double>& g, double tol) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(g[i])) return false;
        if (std::abs(g[i] - x[i]) > tol * std::max(std::abs(x[i]), 1.0)) return false;
    }
    return true;
}

}  // namespace

WegsteinOptions WegsteinOptions::from(const SimulationConfig& cfg) {
    return {cfg.tolerance, cfg.max_iter, cfg.q_min, cfg.q_max, true};
}

WegsteinResult wegstein_solve(const VectorMap& update, std::vector<double> initial, const WegsteinOptions& opts) {
    WegsteinResult res;
    std::vector<double> x = std::move(initial);
    std::vector<double> gx = update(x);
    res.iterations = 1;
    if (gx.size() != x.size()) throw std::invalid_argument("wegstein: update changed the variable count");

    std::vector<double> x_prev, g_prev;
    while (true) {
        if (converged(x, gx, opts.tolerance)) {
            res.x = std::move(x);
            return res;
        }
        if (res.iterations >= opts.max_iter) break;
        for (double v : gx) {
            if (!std::isfinite(v)) throw NonConvergenceError("wegstein: non-finite iterate");
        }

        std::vector<double> next(x.size());
        if (!opts.accelerate || res.iterations < 3) {
            next = gx;
        } else {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double dx = x[i] - x_prev[i];
                double q = 0.0;
                if (std::abs(dx) > 1e-300) {
                    const double slope = (gx[i] - g_prev[i]) / dx;
                    if (std::abs(slope - 1.0) > 1e-12) q = std::clamp(slope / (slope - 1.0), opts.q_min, opts.q_max);
                }
                next[i] = q * x[i] + (1.0 - q) * gx[i];
            }
        }
        x_prev = std::move(x);
        g_prev = std::move(gx);
        x = std::move(next);
        gx = update(x);
        ++res.iterations;
    }
    throw NonConvergenceError("wegstein: no convergence within " + std::to_string(opts.max_iter) + " iterations");
}

std::vector<double> stream_to_vars(const Stream& s) {
    std::vector<double> v(kVarsPerStream);
    for (std::size_t i = 0; i < kNumComponents; ++i) v[i] = s.component_flow(i);
    v[kNumComponents] = s.temperature_c;
    return v;
}

Stream vars_to_stream(const double* v) {
    Stream s;
    double total = 0.0;
    for (std::size_t i = 0; i < kNumComponents; ++i) total += std::max(0.0, v[i]);
    s.flow = total;
    s.temperature_c = v[kNumComponents];
    if (total > 0.0) {
        for (std::size_t i = 0; i < kNumComponents; ++i) s.x[i] = std::max(0.0, v[i]) / total;
    } else {
        s.x[kMeOH] = 1.0;
    }
    return s;
}

Stream wegstein_solve(const std::function<Stream(const Stream&)>& update, const Stream& initial,
                      const WegsteinOptions& opts, int* iterations) {
    auto res = wegstein_solve(
        [&](const std::vector<double>& v) { return stream_to_vars(update(vars_to_stream(v.data()))); },
        stream_to_vars(initial), opts);
    if (iterations) *iterations = res.iterations;
    Stream out = vars_to_stream(res.x.data());
    if (out.flow == 0.0) out.x = initial.x;
    return out;
}

FlowsheetSimulator::FlowsheetSimulator(const Config& cfg)
    : models_(cfg), options_(WegsteinOptions::from(cfg.simulation)) {}

std::vector<double> FlowsheetSimulator::pass(FlowsheetGraph& g, const std::vector<int>& order,
                                             const std::vector<int>& tears,
                                             const std::vector<double>& tear_values) const {
    auto& edges = g.mutable_edges();
    for (std::size_t t = 0; t < tears.size(); ++t) {
        Stream s = vars_to_stream(tear_values.data() + t * kVarsPerStream);
        if (s.flow == 0.0) s.x = g.feed().x;
        edges[tears[t]].stream = s;
    }

    auto inlet = [&](int id) -> const Stream& {
        int e = g.inlet_edge(id);
        if (e < 0) throw SimulationFailure("unit " + std::to_string(id) + " has no inlet");
        return edges[e].stream;
    };
    auto set_outlet = [&](int id, int port, const Stream& s) {
        for (int e : g.outlet_edges(id)) {
            if (edges[e].port == port) edges[e].stream = s;
        }
    };

    for (int id : order) {
        const UnitNode& n = g.node(id);
        switch (n.kind) {
            case UnitKind::Feed: set_outlet(id, 0, g.feed()); break;
            case UnitKind::Mixer: {
                Stream mixed;
                bool first = true;
                for (int e : g.inlet_edges(id)) {
                    mixed = first ? edges[e].stream : models_.mix(mixed, edges[e].stream);
                    first = false;
                }
                set_outlet(id, 0, mixed);
                break;
            }
            case UnitKind::Reactor: set_outlet(id, 0, models_.simulate_reactor(inlet(id), *n.design)); break;
            case UnitKind::HeatExchanger: set_outlet(id, 0, models_.simulate_hex(inlet(id), *n.design).outlet); break;
            case UnitKind::Column: {
                auto r = models_.simulate_column(inlet(id), *n.design);
                set_outlet(id, 0, r.distillate);
                set_outlet(id, 1, r.bottoms);
                break;
            }
            case UnitKind::Splitter: {
                auto r = models_.split(inlet(id), *n.design);
                set_outlet(id, 1, r.purge);
                break;
            }
            case UnitKind::Product:
            case UnitKind::Undefined: break;
        }
    }

    std::vector<double> out;
    out.reserve(tears.size() * kVarsPerStream);
    for (int t : tears) {
        const Edge& e = edges[t];
        auto r = models_.split(inlet(e.source), *g.node(e.source).design);
        auto v = stream_to_vars(r.recycle);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

FlowsheetGraph FlowsheetSimulator::simulate(const FlowsheetGraph& input, SimulationStats* stats) const {
    FlowsheetGraph g = input;
    const auto& nodes = g.nodes();
    const auto& edges = g.edges();
    for (const auto& n : nodes) {
        if (has_design(n.kind) && !n.design) throw SimulationFailure("unit " + std::to_string(n.id) + " has no design value");
    }

    // Kahn ordering on the graph without recycle edges; ties broken by id.
    std::vector<int> indegree(nodes.size(), 0);
    std::vector<int> tears;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i].recycle) {
            tears.push_back(static_cast<int>(i));
        } else {
            ++indegree[edges[i].target];
        }
    }
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (const auto& n : nodes) {
        if (indegree[n.id] == 0) ready.push(n.id);
    }
    std::vector<int> order;
    while (!ready.empty()) {
        int id = ready.top();
        ready.pop();
        order.push_back(id);
        for (const auto& e : edges) {
            if (e.source == id && !e.recycle && --indegree[e.target] == 0) ready.push(e.target);
        }
    }
    if (order.size() != nodes.size()) throw SimulationFailure("flowsheet contains a cycle without a recycle edge");

    std::vector<double> tear_init;
    for (int t : tears) {
        // Warm start from the last computed recycle; new tears start empty.
        Stream s = edges[t].stream;
        if (!(s.flow > 0.0 && std::isfinite(s.flow) && is_valid(s))) {
            s = g.feed();
            s.flow = 0.0;
        }
        auto v = stream_to_vars(s);
        tear_init.insert(tear_init.end(), v.begin(), v.end());
    }

    std::vector<double> tear_values = tear_init;
    int iterations = 0;
    if (!tears.empty()) {
        FlowsheetGraph work = g;
        auto res = wegstein_solve(
            [&](const std::vector<double>& x) { return pass(work, order, tears, x); }, tear_init, options_);
        tear_values = std::move(res.x);
        iterations = res.iterations;
    }
    pass(g, order, tears, tear_values);
    for (auto& e : g.mutable_edges()) e.resolved = true;
    if (stats) {
        stats->tear_iterations = iterations;
        stats->tear_streams = static_cast<int>(tears.size());
    }
    return g;
}

std::vector<BatchOutcome> simulate_batch_serial(const FlowsheetSimulator& sim, const std::vector<FlowsheetGraph>& graphs) {
    std::vector<BatchOutcome> out(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        try {
            out[i].graph = sim.simulate(graphs[i]);
        } catch (const SimulationFailure& e) {
            out[i].error = e.what();
        }
    }
    return out;
}

std::vector<BatchOutcome> simulate_batch_parallel(const FlowsheetSimulator& sim,
                                                  const std::vector<FlowsheetGraph>& graphs) {
    std::vector<BatchOutcome> out(graphs.size());
    const long n = static_cast<long>(graphs.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        try {
            out[i].graph = sim.simulate(graphs[i]);
        } catch (const SimulationFailure& e) {
            out[i].error = e.what();
        }
    }
    return out;
}

}  // namespace fsrl
