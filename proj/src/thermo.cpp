#include "fsrl/thermo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fsrl {

namespace {

constexpr double kGasConstant = 8.314462618;  // J/(mol K)

Composition from_array(const std::array<double, kNumComponents>& x) {
    Composition c;
    c.x = x;
    return c;
}

}  // namespace

bool is_valid(const Composition& c, double tol) {
    double sum = 0.0;
    for (double v : c.x) {
        if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

Composition normalized(const Composition& c) {
    Composition out;
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumComponents; ++i) {
        out.x[i] = std::max(0.0, c.x[i]);
        sum += out.x[i];
    }
    if (sum > 0.0) {
        for (double& v : out.x) v /= sum;
    }
    return out;
}

Thermo::Thermo(ThermoConfig cfg) : cfg_(std::move(cfg)) {
    for (std::size_t i = 0; i < kNumComponents; ++i) {
        vertices_[i] = {Composition::pure(static_cast<Component>(i)), cfg_.boiling_point_c[i], kComponentNames[i]};
    }
    vertices_[kAzMeOH] = {from_array(cfg_.az_meoac_meoh.x), cfg_.az_meoac_meoh.boiling_point_c, "az(MeOAc,MeOH)"};
    vertices_[kAzH2O] = {from_array(cfg_.az_meoac_h2o.x), cfg_.az_meoac_h2o.boiling_point_c, "az(MeOAc,H2O)"};

    // Normal of the boundary plane through az(MeOAc,MeOH), az(MeOAc,H2O) and
    // pure HOAc, as a homogeneous linear form on mole fractions (4D cofactors).
    Eigen::Matrix<double, 3, 4> m;
    for (int c = 0; c < 4; ++c) {
        m(0, c) = vertices_[kAzMeOH].x[c];
        m(1, c) = vertices_[kAzH2O].x[c];
        m(2, c) = vertices_[kHOAc].x[c];
    }
    for (int i = 0; i < 4; ++i) {
        Eigen::Matrix3d minor;
        for (int r = 0; r < 3; ++r) {
            int col = 0;
            for (int c = 0; c < 4; ++c) {
                if (c == i) continue;
                minor(r, col++) = m(r, c);
            }
        }
        normal_[i] = ((i % 2) ? -1.0 : 1.0) * minor.determinant();
    }
    double norm = 0.0;
    for (double v : normal_) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw ConfigError("azeotropes and HOAc do not span a plane");
    if (normal_[kMeOAc] > 0.0) norm = -norm;  // pure MeOAc on the negative side
    for (double& v : normal_) v /= norm;

    const std::array<std::array<std::size_t, 4>, 3> topology{{
        {kMeOAc, kAzMeOH, kAzH2O, kHOAc},
        {kAzMeOH, kAzH2O, kH2O, kHOAc},
        {kAzMeOH, kMeOH, kH2O, kHOAc},
    }};
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        Eigen::Matrix4d vmat;
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) vmat(i, j) = vertices_[topology[k][j]].x[i];
        Eigen::FullPivLU<Eigen::Matrix4d> lu(vmat);
        if (!lu.isInvertible()) throw ConfigError("degenerate tessellation cell");
        Eigen::Matrix4d inv = lu.inverse();
        cells_[k].vertex = topology[k];
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) cells_[k].inverse[r][c] = inv(r, c);
    }
}

double Thermo::forward_rate_constant(double t_kelvin) const {
    return cfg_.kinetics.prefactor * std::exp(-cfg_.kinetics.activation_energy / (kGasConstant * t_kelvin));
}

double Thermo::equilibrium_constant(double t_kelvin) const {
    return cfg_.kinetics.keq_prefactor * std::exp(cfg_.kinetics.keq_temperature_coeff / t_kelvin);
}

double Thermo::reaction_rate(const Composition& c, double t_kelvin) const {
    if (!(t_kelvin >= cfg_.min_reaction_temperature_k && t_kelvin <= cfg_.max_reaction_temperature_k)) {
        throw DomainError("reaction temperature " + std::to_string(t_kelvin) + " K outside operating window");
    }
    const double kf = forward_rate_constant(t_kelvin);
    const double keq = equilibrium_constant(t_kelvin);
    return kf * (c[kHOAc] * c[kMeOH] - c[kMeOAc] * c[kH2O] / keq);
}

double Thermo::boundary_distance(const Composition& c) const {
    double d = 0.0;
    for (std::size_t i = 0; i < kNumComponents; ++i) d += normal_[i] * c[i];
    return d;
}

Region Thermo::distillation_region(const Composition& c) const {
    return boundary_distance(c) >= 0.0 ? Region::II : Region::I;
}

std::array<double, 4> Thermo::barycentric(const Cell& cell, const Composition& c) const {
    std::array<double, 4> w{};
    for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += cell.inverse[r][k] * c[k];
        w[r] = s;
    }
    return w;
}

std::size_t Thermo::locate(const Composition& c, std::array<double, 4>& weights) const {
    if (distillation_region(c) == Region::I) {
        weights = barycentric(cells_[0], c);
        return 0;
    }
    std::size_t best = 1;
    double best_min = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < cells_.size(); ++k) {
        auto w = barycentric(cells_[k], c);
        double mn = *std::min_element(w.begin(), w.end());
        if (mn > best_min) {
            best_min = mn;
            best = k;
            weights = w;
        }
    }
    return best;
}

double Thermo::bubble_point(const Composition& c, double pressure_bar) const {
    if (pressure_bar != 1.0) throw DomainError("only P = 1 bar is supported");
    std::array<double, 4> w{};
    const Cell& cell = cells_[locate(c, w)];
    double t = 0.0;
    for (int j = 0; j < 4; ++j) t += w[j] * vertices_[cell.vertex[j]].boiling_point_c;
    return t;
}

}  // namespace fsrl
