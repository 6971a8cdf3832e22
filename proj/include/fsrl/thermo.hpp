#pragma once

// Physical chemistry of the quaternary MeOAc / MeOH / HOAc / H2O system at
// 1 bar: esterification kinetics, the linearized distillation boundary and a
// piecewise-linear bubble-point surface.

#include <array>
#include <stdexcept>
#include <string>

#include "fsrl/config.hpp"

namespace fsrl {

enum Component : std::size_t { kMeOAc = 0, kMeOH = 1, kHOAc = 2, kH2O = 3 };

inline constexpr std::array<const char*, kNumComponents> kComponentNames{"MeOAc", "MeOH", "HOAc", "H2O"};

// Mole fractions in component order [MeOAc, MeOH, HOAc, H2O].
struct Composition {
    std::array<double, kNumComponents> x{};

    double operator[](std::size_t i) const { return x[i]; }
    double& operator[](std::size_t i) { return x[i]; }
    bool operator==(const Composition&) const = default;

    static Composition pure(Component c) {
        Composition out;
        out.x[c] = 1.0;
        return out;
    }
};

// Each entry in [0, 1] and the sum equals 1 within `tol`.
bool is_valid(const Composition& c, double tol = 1e-9);

// Clips tiny negative entries and renormalizes.
Composition normalized(const Composition& c);

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class Region { I, II };

// A composition-space point that acts as a vertex of the boundary/tessellation.
struct Vertex {
    Composition x;
    double boiling_point_c = 0.0;
    std::string name;
};

// Four vertices spanning one tetrahedron of the composition simplex.
struct Cell {
    std::array<std::size_t, 4> vertex{};  // indices into Thermo::vertices()
    std::array<std::array<double, 4>, 4> inverse{};  // maps mole fractions -> barycentric weights
};

class Thermo {
public:
    explicit Thermo(ThermoConfig cfg = {});

    const ThermoConfig& config() const { return cfg_; }

    double forward_rate_constant(double t_kelvin) const;
    double equilibrium_constant(double t_kelvin) const;

    // Signed esterification rate in mol/(m^3 s), positive in the forward
    // direction HOAc + MeOH -> MeOAc + H2O. Throws DomainError outside the
    // configured temperature window.
    double reaction_rate(const Composition& c, double t_kelvin) const;

    // Signed distance of `c` from the plane through both azeotropes and pure
    // HOAc; negative on the MeOAc-rich side (region I).
    double boundary_distance(const Composition& c) const;
    Region distillation_region(const Composition& c) const;

    // Boiling temperature in deg C. Only P = 1 bar is supported.
    double bubble_point(const Composition& c, double pressure_bar = 1.0) const;

    // Vertices: pure components (indices 0..3), then the MeOAc/MeOH azeotrope
    // (4) and the MeOAc/H2O azeotrope (5).
    const std::array<Vertex, 6>& vertices() const { return vertices_; }

    // Tessellation: cell 0 is region I, cells 1 and 2 cover region II.
    const std::array<Cell, 3>& cells() const { return cells_; }

    // Index of the cell containing `c` and its barycentric weights in that cell.
    std::size_t locate(const Composition& c, std::array<double, 4>& weights) const;

    static constexpr std::size_t kAzMeOH = 4;
    static constexpr std::size_t kAzH2O = 5;

private:
    std::array<double, 4> barycentric(const Cell& cell, const Composition& c) const;

    ThermoConfig cfg_;
    std::array<Vertex, 6> vertices_;
    std::array<Cell, 3> cells_;
    std::array<double, kNumComponents> normal_{};
};

}  // namespace fsrl
