#include "fsrl/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fsrl {

namespace {

constexpr double kKelvin = 273.15;
constexpr std::array<double, kNumComponents> kStoichiometry{1.0, -1.0, -1.0, 1.0};

}  // namespace

UnitModels::UnitModels(const Config& cfg)
    : thermo_(cfg.thermo), reactor_(cfg.reactor), hex_(cfg.hex), column_(cfg.column) {}

double UnitModels::heat_capacity(const Composition& x) const {
    double cp = 0.0;
    for (std::size_t i = 0; i < kNumComponents; ++i) cp += x[i] * hex_.cp_liquid[i];
    return cp;
}

double UnitModels::reactor_volume(const Stream& inlet, double length) const {
    return reactor_.area_per_flow * inlet.flow * length;
}

Stream UnitModels::simulate_reactor(const Stream& inlet, double length) const {
    const double t_kelvin = inlet.temperature_c + kKelvin;
    const double h = length / reactor_.rk4_steps;
    const double scale = reactor_.area_per_flow;
    try {
        (void)thermo_.reaction_rate(inlet.x, t_kelvin);
    } catch (const DomainError& e) {
        throw SimulationFailure(std::string("reactor: ") + e.what());
    }
    // Isothermal: rate constants are fixed along the reactor.
    const double kf = thermo_.forward_rate_constant(t_kelvin) * scale;
    const double inv_keq = 1.0 / thermo_.equilibrium_constant(t_kelvin);

    // The reaction is equimolar and single, so the composition stays on the
    // line x = x_in + nu * extent; RK4 integrates the scalar extent.
    const auto& x0 = inlet.x;
    auto rhs = [&](double extent) {
        const double meoac = x0[kMeOAc] + extent;
        const double meoh = x0[kMeOH] - extent;
        const double hoac = x0[kHOAc] - extent;
        const double h2o = x0[kH2O] + extent;
        return kf * (hoac * meoh - meoac * h2o * inv_keq);
    };

    double extent = 0.0;
    std::array<double, kNumComponents> x = x0.x;
    for (int step = 0; step < reactor_.rk4_steps; ++step) {
        const double k1 = rhs(extent);
        const double k2 = rhs(extent + 0.5 * h * k1);
        const double k3 = rhs(extent + 0.5 * h * k2);
        const double k4 = rhs(extent + h * k3);
        extent += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        for (std::size_t i = 0; i < kNumComponents; ++i) {
            x[i] = x0[i] + kStoichiometry[i] * extent;
            if (!(x[i] >= -1e-9 && x[i] <= 1.0 + 1e-9)) {
                throw SimulationFailure("reactor integration left the composition simplex");
            }
        }
    }
    Stream out = inlet;
    Composition c;
    c.x = x;
    out.x = normalized(c);
    return out;
}

HexResult UnitModels::simulate_hex(const Stream& inlet, double t_water_in) const {
    HexResult r;
    r.outlet = inlet;
    const double diff = t_water_in - inlet.temperature_c;
    const double approach = hex_.approach_temperature;
    if (std::abs(diff) <= approach) return r;

    r.outlet.temperature_c = diff > 0.0 ? t_water_in - approach : t_water_in + approach;
    r.duty = inlet.flow * heat_capacity(inlet.x) * (r.outlet.temperature_c - inlet.temperature_c);

    // Countercurrent profile: `approach` at the end where the process stream
    // leaves, water-side change capped at half the inlet difference so the
    // profiles never cross.
    const double water_change = std::min(hex_.water_delta_t, 0.5 * std::abs(diff));
    const double dt_hot = approach;
    const double dt_cold = std::abs(diff) - water_change;
    const double lmtd = std::abs(dt_hot - dt_cold) < 1e-12 ? dt_hot : (dt_hot - dt_cold) / std::log(dt_hot / dt_cold);
    r.area = std::abs(r.duty) / (hex_.heat_transfer_coefficient * lmtd);
    return r;
}

ColumnResult UnitModels::simulate_column(const Stream& inlet, double d_to_f) const {
    ColumnResult r;
    r.distillate = inlet;
    r.bottoms = inlet;
    r.distillate.flow = d_to_f * inlet.flow;
    r.bottoms.flow = inlet.flow - r.distillate.flow;
    if (inlet.flow <= 0.0) {
        r.distillate.flow = r.bottoms.flow = 0.0;
        return r;
    }

    // Express the feed in pseudo-components (the vertices of its cell) and
    // draw the distillate from them in boiling order.
    std::array<double, 4> w{};
    const Cell& cell = thermo_.cells()[thermo_.locate(inlet.x, w)];
    double wsum = 0.0;
    for (double& v : w) {
        v = std::max(0.0, v);
        wsum += v;
    }
    for (double& v : w) v /= wsum;

    std::array<int, 4> order{0, 1, 2, 3};
    const auto& verts = thermo_.vertices();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return verts[cell.vertex[a]].boiling_point_c < verts[cell.vertex[b]].boiling_point_c;
    });

    double remaining = d_to_f;
    std::array<double, kNumComponents> xd{};
    for (int j : order) {
        const double take = std::min(remaining, w[j]);
        if (take <= 0.0) continue;
        const Composition& v = verts[cell.vertex[j]].x;
        for (std::size_t i = 0; i < kNumComponents; ++i) xd[i] += take * v[i];
        remaining -= take;
    }
    for (double& v : xd) v /= d_to_f;

    std::array<double, kNumComponents> xb{};
    double worst = 0.0;
    const double b_frac = 1.0 - d_to_f;
    for (std::size_t i = 0; i < kNumComponents; ++i) {
        xb[i] = (inlet.x[i] - d_to_f * xd[i]) / b_frac;
        worst = std::min(worst, xb[i]);
    }
    if (worst < -1e-6) throw SimulationFailure("column mass balance produced a negative bottoms fraction");

    Composition cd, cb;
    cd.x = xd;
    cb.x = xb;
    r.distillate.x = normalized(cd);
    r.bottoms.x = worst < 0.0 ? normalized(cb) : cb;
    r.distillate.temperature_c = thermo_.bubble_point(r.distillate.x);
    r.bottoms.temperature_c = thermo_.bubble_point(r.bottoms.x);
    r.vapor_load = r.distillate.flow * (1.0 + column_.effective_reflux);
    return r;
}

SplitResult UnitModels::split(const Stream& inlet, double ratio) const {
    SplitResult r{inlet, inlet};
    r.recycle.flow = ratio * inlet.flow;
    r.purge.flow = inlet.flow - r.recycle.flow;
    return r;
}

Stream UnitModels::mix(const Stream& a, const Stream& b) const {
    if (b.flow == 0.0) return a;
    if (a.flow == 0.0) return b;
    Stream out;
    out.flow = a.flow + b.flow;
    for (std::size_t i = 0; i < kNumComponents; ++i) out.x[i] = (a.component_flow(i) + b.component_flow(i)) / out.flow;
    const double ca = a.flow * heat_capacity(a.x);
    const double cb = b.flow * heat_capacity(b.x);
    out.temperature_c = (ca * a.temperature_c + cb * b.temperature_c) / (ca + cb);
    return out;
}

}  // namespace fsrl
