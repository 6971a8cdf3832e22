#pragma once

// Clipped-surrogate policy optimization for the hierarchical agent:
// trajectory memory, generalized advantage estimation, the weighted
// multi-level loss and the episode-collecting training loop.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsrl/agent.hpp"
#include "fsrl/config.hpp"
#include "fsrl/econ.hpp"
#include "fsrl/env.hpp"

namespace fsrl {

enum class TrainMode { Discrete, Continuous, Hybrid };
TrainMode parse_mode(const std::string& s);  // throws std::invalid_argument
const char* to_string(TrainMode m);

struct Transition {
    FlowsheetGraph state;  // before the action
    Decision decision;
    std::array<bool, kNumLevels> active{};
    std::array<double, kNumLevels> log_prob{};
    double reward = 0.0;  // EUR/y, unscaled
    bool done = false;
    double value = 0.0;  // critic output at `state` (learner units)
    FlowsheetGraph next_state;
};

class TrajectoryMemory {
public:
    void push(Transition t) { items_.push_back(std::move(t)); }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const std::vector<Transition>& items() const { return items_; }
    // Removes and returns the oldest n transitions.
    std::vector<Transition> take(std::size_t n);
    void clear() { items_.clear(); }

private:
    std::vector<Transition> items_;
};

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// values[t] is v(s_t); `bootstrap` is v(s_T) after the last step, used only
// when that step is not terminal.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda, double bootstrap = 0.0);

struct Minibatch {
    std::vector<std::array<bool, kNumLevels>> active;
    std::vector<std::array<double, kNumLevels>> old_log_prob;
    std::vector<double> advantages;  // already normalized
    std::vector<double> returns;
};

struct LossBreakdown {
    nn::Tensor total;
    std::array<double, kNumLevels> clip{};     // L_clip per level
    std::array<double, kNumLevels> entropy{};  // mean entropy per level
    double value = 0.0;                        // MSE
    int dropped = 0;                           // samples with non-finite ratios
};

LossBreakdown ppo_loss(const Evaluation& eval, const Minibatch& mb, const PpoConfig& cfg);

// Mean 0, standard deviation 1 (population); all zeros when constant.
std::vector<double> normalize(const std::vector<double>& v);

struct UpdateStats {
    int minibatches = 0;
    int skipped = 0;  // Adam steps rejected for non-finite gradients
    double loss = 0.0;
};

class PpoLearner {
public:
    PpoLearner(Agent& agent, const PpoConfig& cfg, std::uint64_t seed);

    // Runs the configured epochs over one batch of consecutive transitions.
    UpdateStats update(const std::vector<Transition>& batch);
    nn::Adam& optimizer() { return adam_; }

private:
    Agent& agent_;
    PpoConfig cfg_;
    nn::Adam adam_;
    nn::Rng rng_;
};

// Scripted decision levels per step.
using ControlsFn = std::function<Controls(int step, const FlowsheetGraph& state)>;
ControlsFn controls_for(TrainMode mode, const Config& cfg);

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

struct EpisodeRecord {
    int episode = 0;
    double score = 0.0;
    std::optional<Outcome> outcome;
    FlowsheetGraph final_state;
    std::vector<Transition> transitions;
    std::vector<ActionTriple> actions;
};

EpisodeRecord run_episode(Environment& env, const Agent& agent, nn::Rng& rng, const ControlsFn& controls,
                          int episode, int max_steps = 200);

// Per-episode generator, independent of scheduling.
nn::Rng episode_rng(std::uint64_t seed, int episode);

struct TrainOptions {
    TrainMode mode = TrainMode::Hybrid;
    int episodes = 1;
    std::uint64_t seed = 0;
    int workers = 1;
    int checkpoint_every = 0;             // 0: only the final checkpoint
    std::filesystem::path out_dir;        // empty: write nothing
    ControlsFn controls;                  // overrides the mode's script when set
    int log_every = 500;
};

struct TrainResult {
    std::vector<double> scores;  // final reward per episode, EUR/y
    std::vector<double> avg50;   // moving average over the last <= 50 episodes
    double best_score = 0.0;
    int best_episode = -1;
    FlowsheetGraph best_flowsheet;
    int updates = 0;
    int skipped_steps = 0;
};

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window);

TrainResult train(const Config& cfg, Agent& agent, const EnvFactory& make_env, const TrainOptions& opts);

std::uint64_t fnv1a(const std::string& s);
std::string version_string();

}  // namespace fsrl
