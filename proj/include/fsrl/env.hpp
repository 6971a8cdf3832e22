#pragma once

// The flowsheet-synthesis MDP: apply a hierarchical action, re-simulate,
// and pay the economic reward once no open streams remain.

#include <optional>
#include <string>

#include "fsrl/config.hpp"
#include "fsrl/econ.hpp"
#include "fsrl/flowsheet.hpp"
#include "fsrl/simulate.hpp"

namespace fsrl {

// Unit kinds selectable by the second decision level, in output order.
inline constexpr std::array<UnitKind, 5> kActionUnits{UnitKind::Reactor, UnitKind::HeatExchanger, UnitKind::Column,
                                                      UnitKind::Splitter, UnitKind::Product};
int action_index(UnitKind k);  // position in kActionUnits, -1 if not selectable

struct ActionTriple {
    int location = 0;
    UnitKind unit = UnitKind::Product;
    // In [0, 1] and scaled to the unit's physical range, unless `physical`.
    std::optional<double> design;
    bool physical = false;
};

struct StepResult {
    FlowsheetGraph state;
    double reward = 0.0;
    bool done = false;
    std::optional<Outcome> outcome;  // set when done
};

// Anything the trainer can roll out against.
class Environment {
public:
    virtual ~Environment() = default;
    virtual FlowsheetGraph reset() = 0;
    virtual StepResult step(const ActionTriple& a) = 0;
};

class FlowsheetEnv : public Environment {
public:
    explicit FlowsheetEnv(const Config& cfg = {});

    FlowsheetGraph reset() override;
    StepResult step(const ActionTriple& a) override;

    const FlowsheetGraph& state() const { return state_; }
    bool done() const { return done_; }
    int steps() const { return steps_; }
    const DesignLimits& limits() const { return limits_; }
    const Economics& economics() const { return econ_; }
    const FlowsheetSimulator& simulator() const { return sim_; }
    Stream feed_stream() const;

    // Physical value for a unit-interval design on `kind`.
    double scale_design(UnitKind kind, double unit_value) const;

private:
    StepResult finish(FlowsheetGraph g);
    StepResult fail(FlowsheetGraph g);

    Config cfg_;
    DesignLimits limits_;
    FlowsheetSimulator sim_;
    Economics econ_;
    FlowsheetGraph state_;
    bool done_ = false;
    int steps_ = 0;
};

}  // namespace fsrl
