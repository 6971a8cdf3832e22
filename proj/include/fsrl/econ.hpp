#pragma once

// Economic evaluation of a completed flowsheet and the episode reward.

#include <vector>

#include "fsrl/config.hpp"
#include "fsrl/flowsheet.hpp"
#include "fsrl/units.hpp"

namespace fsrl {

struct UnitCost {
    int node = 0;
    UnitKind kind = UnitKind::Reactor;
    double utility = 0.0;  // EUR/y
    double capital = 0.0;  // EUR
};

struct EconReport {
    double revenue = 0.0;      // EUR/y
    double feed_cost = 0.0;    // EUR/y
    double unit_cost = 0.0;    // EUR/y, sum of utility + charge * capital
    double net_cash_flow = 0.0;
    std::vector<UnitCost> units;
};

struct Outcome {
    enum class Kind { Completed, SimFailure, TrivialSale };
    Kind kind = Kind::Completed;
    EconReport report{};

    static Outcome completed(EconReport r) { return {Kind::Completed, std::move(r)}; }
    static Outcome failure() { return {Kind::SimFailure, {}}; }
    static Outcome trivial_sale() { return {Kind::TrivialSale, {}}; }
};

class Economics {
public:
    explicit Economics(const Config& cfg = {});

    const PriceModel& prices() const { return prices_; }
    const CostModel& costs() const { return costs_; }

    // Logistic purity price on the majority component.
    double stream_value(const Stream& s) const;
    // Raw material cost at pure-component prices.
    double feed_cost(const Stream& s) const;

    UnitCost unit_cost(const FlowsheetGraph& g, int node) const;

    // Requires a resolved flowsheet with no open streams left.
    EconReport net_cash_flow(const FlowsheetGraph& g) const;

    double reward(const Outcome& outcome) const;

private:
    PriceModel prices_;
    CostModel costs_;
    ColumnConfig column_;
    UnitModels models_;
    double failure_penalty_;
    double negative_scale_;
};

}  // namespace fsrl
