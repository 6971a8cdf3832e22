#pragma once

// Hierarchical hybrid actor-critic. A shared graph network turns the
// flowsheet into node embeddings and a fingerprint; level 1 picks an open
// stream from the node embeddings, level 2 a unit type, level 3 the unit's
// design value from a per-unit Beta head, and the critic values the state.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fsrl/config.hpp"
#include "fsrl/env.hpp"
#include "fsrl/flowsheet.hpp"
#include "fsrl/nn.hpp"

namespace fsrl {

inline constexpr int kNumLevels = 3;
inline constexpr int kNumUnitChoices = static_cast<int>(kActionUnits.size());
inline constexpr int kNumDesignHeads = kNumUnitChoices - 1;  // Product has none

// An action in the learner's terms.
struct Decision {
    int location_index = 0;  // position in open_streams()
    int unit = 0;            // index into kActionUnits
    double design = 0.5;     // Beta sample in (0, 1); ignored for Product
};

// Levels that are scripted rather than sampled. A forced level reports
// log-prob 0 and entropy 0 and is excluded from learning.
struct Controls {
    std::optional<int> location_index;
    std::optional<int> unit;
    // Pinned physical design value per design head (disables level 3).
    std::optional<std::array<double, kNumDesignHeads>> pinned_design;
};

struct AgentOutput {
    ActionTriple action;
    Decision decision;
    std::array<double, kNumLevels> log_prob{};
    std::array<double, kNumLevels> entropy{};
    std::array<bool, kNumLevels> active{};  // level was sampled by the policy
    double value = 0.0;
};

struct Evaluation {
    nn::Tensor log_prob;  // B x 3
    nn::Tensor entropy;   // B x 3
    nn::Tensor value;     // B x 1
};

struct Encoding {
    nn::GraphBatch batch;
    nn::Tensor nodes;        // N x node_embedding
    nn::Tensor fingerprint;  // B x fingerprint
};

class Agent {
public:
    Agent(const Config& cfg, std::uint64_t seed);

    Encoding encode(const std::vector<const FlowsheetGraph*>& states) const;

    // Level 1: log-probabilities over the open streams of each state
    // (concatenated in state order).
    nn::Tensor location_log_probs(const Encoding& enc, const std::vector<const FlowsheetGraph*>& states) const;
    // Level 2: B x 5 log-probabilities.
    nn::Tensor unit_log_probs(const nn::Tensor& fingerprint, const std::vector<int>& location_index) const;
    // Level 3: alpha and beta (rows x 1) of head `head` for the given rows.
    std::pair<nn::Tensor, nn::Tensor> design_params(int head, const nn::Tensor& fingerprint,
                                                    const std::vector<int>& location_index) const;
    nn::Tensor value(const nn::Tensor& fingerprint) const;

    // Samples an action without recording gradients.
    AgentOutput act(const FlowsheetGraph& g, nn::Rng& rng, const Controls& controls = {}) const;
    double value(const FlowsheetGraph& g) const;

    // Log-probs, entropies and values of stored decisions under the current
    // parameters, with gradients. Level-3 entries of Product decisions are 0;
    // masking forced levels is left to the caller.
    Evaluation evaluate(const std::vector<const FlowsheetGraph*>& states, const std::vector<Decision>& decisions) const;

    nn::ParameterSet& parameters() { return params_; }
    const nn::ParameterSet& parameters() const { return params_; }
    const DesignLimits& limits() const { return limits_; }
    const AgentConfig& config() const { return cfg_; }

    // Unit-interval design value to physical value for action slot `unit`.
    double physical_design(int unit, double unit_value) const;

private:
    nn::Tensor location_one_hot(const std::vector<int>& location_index) const;

    AgentConfig cfg_;
    DesignLimits limits_;
    FeatureConfig features_;
    nn::Activation act_;

    nn::Linear input_;
    nn::GcnLayer message_passing_;
    nn::Linear pool_;
    nn::GcnLayer level1_hidden_;
    nn::GcnLayer level1_out_;
    nn::Mlp level2_;
    std::array<nn::Mlp, kNumDesignHeads> level3_;
    nn::Mlp critic_;
    nn::ParameterSet params_;
};

}  // namespace fsrl
