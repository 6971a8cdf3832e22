#pragma once

// Unit-operation models: isothermal PFR, countercurrent heat exchanger,
// infinite/infinite shortcut column, splitter and mixer.

#include <stdexcept>

#include "fsrl/config.hpp"
#include "fsrl/flowsheet.hpp"
#include "fsrl/thermo.hpp"

namespace fsrl {

// A unit model could not produce a physical outlet.
class SimulationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HexResult {
    Stream outlet;
    double duty = 0.0;  // W, positive when the process stream is heated
    double area = 0.0;  // m^2
};

struct ColumnResult {
    Stream distillate;
    Stream bottoms;
    double vapor_load = 0.0;  // mol/s
};

struct SplitResult {
    Stream recycle;
    Stream purge;
};

class UnitModels {
public:
    explicit UnitModels(const Config& cfg = {});

    const Thermo& thermo() const { return thermo_; }
    const ReactorConfig& reactor_config() const { return reactor_; }

    double heat_capacity(const Composition& x) const;  // J/(mol K)

    // Fixed-step RK4 along the reactor length; the state is the liquid
    // composition, dx/dz = nu * r(x, T) * (A / N).
    Stream simulate_reactor(const Stream& inlet, double length) const;
    double reactor_volume(const Stream& inlet, double length) const;

    HexResult simulate_hex(const Stream& inlet, double t_water_in) const;
    ColumnResult simulate_column(const Stream& inlet, double d_to_f) const;

    SplitResult split(const Stream& inlet, double ratio) const;
    Stream mix(const Stream& a, const Stream& b) const;

private:
    Thermo thermo_;
    ReactorConfig reactor_;
    HexConfig hex_;
    ColumnConfig column_;
};

}  // namespace fsrl
