#include "fsrl/econ.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsrl {

namespace {

double capital(const CapitalLaw& law, double size) { return size > 0.0 ? law.a * std::pow(size, law.b) : 0.0; }

}  // namespace

Economics::Economics(const Config& cfg)
    : prices_(cfg.prices),
      costs_(cfg.costs),
      column_(cfg.column),
      models_(cfg),
      failure_penalty_(cfg.env.failure_penalty),
      negative_scale_(cfg.env.negative_scale) {}

double Economics::stream_value(const Stream& s) const {
    if (s.flow <= 0.0) return 0.0;
    const auto major = static_cast<std::size_t>(std::max_element(s.x.x.begin(), s.x.x.end()) - s.x.x.begin());
    const double purity = s.x[major];
    const double sigma = 1.0 / (1.0 + std::exp(-prices_.steepness * (purity - prices_.midpoint)));
    return s.flow * prices_.seconds_per_year * prices_.base_price[major] * sigma;
}

double Economics::feed_cost(const Stream& s) const {
    double per_mol = 0.0;
    for (std::size_t i = 0; i < kNumComponents; ++i) per_mol += s.x[i] * prices_.base_price[i];
    return s.flow * prices_.seconds_per_year * per_mol;
}

UnitCost Economics::unit_cost(const FlowsheetGraph& g, int id) const {
    const UnitNode& n = g.node(id);
    UnitCost c{id, n.kind, 0.0, 0.0};
    const int in = g.inlet_edge(id);
    const double year = prices_.seconds_per_year;
    switch (n.kind) {
        case UnitKind::Reactor: {
            const Stream& inlet = g.edges()[in].stream;
            c.capital = capital(costs_.reactor, models_.reactor_volume(inlet, *n.design));
            break;
        }
        case UnitKind::HeatExchanger: {
            const auto r = models_.simulate_hex(g.edges()[in].stream, *n.design);
            const double price = r.duty > 0.0 ? costs_.heating_price : costs_.cooling_price;
            c.utility = std::abs(r.duty) * year * price;
            c.capital = capital(costs_.hex, r.area);
            break;
        }
        case UnitKind::Column: {
            double distillate = 0.0;
            for (int e : g.outlet_edges(id)) {
                if (g.edges()[e].port == 0) distillate = g.edges()[e].stream.flow;
            }
            const double vapor = distillate * (1.0 + column_.effective_reflux);
            const double duty = vapor * column_.heat_of_vaporization;
            c.utility = duty * year * (costs_.heating_price + costs_.cooling_price);
            c.capital = capital(costs_.column, vapor);
            break;
        }
        case UnitKind::Splitter: c.capital = costs_.splitter_capital; break;
        case UnitKind::Mixer: c.capital = costs_.mixer_capital; break;
        default: break;
    }
    return c;
}

EconReport Economics::net_cash_flow(const FlowsheetGraph& g) const {
    if (!g.all_resolved()) throw SimulationRequiredError("economics need a resolved flowsheet");
    if (!g.open_streams().empty()) throw std::logic_error("economics need a completed flowsheet (open streams left)");
    EconReport r;
    r.feed_cost = feed_cost(g.feed());
    for (const auto& n : g.nodes()) {
        if (n.kind == UnitKind::Product) {
            r.revenue += stream_value(g.edges()[g.inlet_edge(n.id)].stream);
        } else if (is_unit(n.kind)) {
            UnitCost c = unit_cost(g, n.id);
            r.unit_cost += c.utility + costs_.capital_charge * c.capital;
            r.units.push_back(c);
        }
    }
    r.net_cash_flow = r.revenue - r.feed_cost - r.unit_cost;
    return r;
}

double Economics::reward(const Outcome& outcome) const {
    switch (outcome.kind) {
        case Outcome::Kind::SimFailure:
        case Outcome::Kind::TrivialSale: return failure_penalty_;
        case Outcome::Kind::Completed: {
            const double ncf = outcome.report.net_cash_flow;
            return ncf >= 0.0 ? ncf : ncf / negative_scale_;
        }
    }
    return failure_penalty_;
}

}  // namespace fsrl
