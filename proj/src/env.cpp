#include "fsrl/env.hpp"

#include <algorithm>
#include <stdexcept>

namespace fsrl {

int action_index(UnitKind k) {
    auto it = std::find(kActionUnits.begin(), kActionUnits.end(), k);
    return it == kActionUnits.end() ? -1 : static_cast<int>(it - kActionUnits.begin());
}

FlowsheetEnv::FlowsheetEnv(const Config& cfg)
    : cfg_(cfg), limits_(DesignLimits::from(cfg)), sim_(cfg), econ_(cfg) {
    reset();
}

Stream FlowsheetEnv::feed_stream() const {
    Stream s;
    s.temperature_c = cfg_.env.feed.temperature_c;
    s.flow = cfg_.env.feed.flow;
    s.x.x = cfg_.env.feed.x;
    return s;
}

FlowsheetGraph FlowsheetEnv::reset() {
    state_ = new_flowsheet(feed_stream());
    done_ = false;
    steps_ = 0;
    return state_;
}

double FlowsheetEnv::scale_design(UnitKind kind, double unit_value) const {
    return limits_.range(kind).scale(std::clamp(unit_value, 0.0, 1.0));
}

StepResult FlowsheetEnv::fail(FlowsheetGraph g) {
    state_ = std::move(g);
    done_ = true;
    Outcome o = Outcome::failure();
    return {state_, econ_.reward(o), true, o};
}

StepResult FlowsheetEnv::finish(FlowsheetGraph g) {
    state_ = std::move(g);
    done_ = true;
    Outcome o = state_.unit_count() == 0 ? Outcome::trivial_sale() : Outcome::completed(econ_.net_cash_flow(state_));
    return {state_, econ_.reward(o), true, o};
}

StepResult FlowsheetEnv::step(const ActionTriple& a) {
    if (done_) throw std::logic_error("step() called on a finished episode");
    ++steps_;

    std::optional<double> design;
    if (has_design(a.unit)) {
        if (!a.design) throw IllegalActionError(std::string("missing design value for ") + to_string(a.unit));
        design = a.physical ? *a.design : scale_design(a.unit, *a.design);
    }

    FlowsheetGraph next;
    try {
        next = state_.extend(a.location, a.unit, design, limits_);
    } catch (const UnitCapError&) {
        return finish(state_.close_all_open());
    }

    try {
        next = sim_.simulate(next);
    } catch (const SimulationFailure&) {
        return fail(std::move(next));
    }

    if (next.open_streams().empty()) return finish(std::move(next));
    if (next.unit_count() >= limits_.max_units) return finish(next.close_all_open());

    state_ = std::move(next);
    return {state_, 0.0, false, std::nullopt};
}

}  // namespace fsrl
