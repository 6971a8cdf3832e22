#pragma once

// Sequential-modular flowsheet evaluation. Recycle (splitter -> mixer) edges
// are torn and converged with per-variable Wegstein acceleration.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsrl/flowsheet.hpp"
#include "fsrl/units.hpp"

namespace fsrl {

class NonConvergenceError : public SimulationFailure {
public:
    using SimulationFailure::SimulationFailure;
};

struct WegsteinOptions {
    double tolerance = 1e-8;
    int max_iter = 200;
    double q_min = -5.0;
    double q_max = 0.9;
    bool accelerate = true;  // false: plain successive substitution

    static WegsteinOptions from(const SimulationConfig& cfg);
};

struct WegsteinResult {
    std::vector<double> x;
    int iterations = 0;  // number of update evaluations
};

using VectorMap = std::function<std::vector<double>(const std::vector<double>&)>;

// Returns x with |update(x) - x| <= tolerance * max(|x|, 1) per variable.
// The first two iterates are direct substitution; afterwards each variable
// is accelerated with its own secant slope, q clamped to [q_min, q_max].
WegsteinResult wegstein_solve(const VectorMap& update, std::vector<double> initial, const WegsteinOptions& opts = {});

// Stream form: the variables are the four component flows and temperature.
Stream wegstein_solve(const std::function<Stream(const Stream&)>& update, const Stream& initial,
                      const WegsteinOptions& opts = {}, int* iterations = nullptr);

std::vector<double> stream_to_vars(const Stream& s);
Stream vars_to_stream(const double* v);

struct SimulationStats {
    int tear_iterations = 0;
    int tear_streams = 0;
};

class FlowsheetSimulator {
public:
    explicit FlowsheetSimulator(const Config& cfg = {});

    const UnitModels& models() const { return models_; }
    const WegsteinOptions& options() const { return options_; }

    // Resolves every stream. Throws SimulationFailure (or NonConvergenceError)
    // when a unit fails or a recycle does not converge.
    FlowsheetGraph simulate(const FlowsheetGraph& g, SimulationStats* stats = nullptr) const;

private:
    // One topological pass with the given tear values; returns the recycle
    // streams computed by the splitters.
    std::vector<double> pass(FlowsheetGraph& g, const std::vector<int>& order, const std::vector<int>& tears,
                             const std::vector<double>& tear_values) const;

    UnitModels models_;
    WegsteinOptions options_;
};

inline FlowsheetGraph simulate_flowsheet(const FlowsheetGraph& g, const Config& cfg = {}) {
    return FlowsheetSimulator(cfg).simulate(g);
}

struct BatchOutcome {
    std::optional<FlowsheetGraph> graph;  // empty on failure
    std::string error;
};

// Independent evaluation of many flowsheets: serial reference and OpenMP version.
std::vector<BatchOutcome> simulate_batch_serial(const FlowsheetSimulator& sim, const std::vector<FlowsheetGraph>& graphs);
std::vector<BatchOutcome> simulate_batch_parallel(const FlowsheetSimulator& sim, const std::vector<FlowsheetGraph>& graphs);

}  // namespace fsrl
