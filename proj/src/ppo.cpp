#include "fsrl/ppo.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

#ifndef FSRL_VERSION
#define FSRL_VERSION "unknown"
#endif

namespace fsrl {

using nlohmann::json;
using nn::Matrix;
using nn::Tensor;

TrainMode parse_mode(const std::string& s) {
    if (s == "discrete") return TrainMode::Discrete;
    if (s == "continuous") return TrainMode::Continuous;
    if (s == "hybrid") return TrainMode::Hybrid;
    throw std::invalid_argument("unknown mode '" + s + "' (expected discrete, continuous or hybrid)");
}

const char* to_string(TrainMode m) {
    switch (m) {
        case TrainMode::Discrete: return "discrete";
        case TrainMode::Continuous: return "continuous";
        case TrainMode::Hybrid: return "hybrid";
    }
    return "?";
}

std::vector<Transition> TrajectoryMemory::take(std::size_t n) {
    n = std::min(n, items_.size());
    std::vector<Transition> out(std::make_move_iterator(items_.begin()),
                                std::make_move_iterator(items_.begin() + static_cast<std::ptrdiff_t>(n)));
    items_.erase(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda, double bootstrap) {
    const std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
    GaeResult r;
    r.advantages.assign(n, 0.0);
    r.returns.assign(n, 0.0);
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double next_value = t + 1 < n ? values[t + 1] : bootstrap;
        const double live = dones[t] ? 0.0 : 1.0;
        const double delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        r.advantages[t] = running;
        r.returns[t] = running + values[t];
    }
    return r;
}

std::vector<double> normalize(const std::vector<double>& v) {
    if (v.empty()) return {};
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> out(v.size(), 0.0);
    if (sd < 1e-12) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / (sd + 1e-8);
    return out;
}

LossBreakdown ppo_loss(const Evaluation& eval, const Minibatch& mb, const PpoConfig& cfg) {
    const int n = static_cast<int>(mb.advantages.size());
    if (eval.log_prob.rows() != n || mb.active.size() != mb.advantages.size() ||
        mb.old_log_prob.size() != mb.advantages.size() || mb.returns.size() != mb.advantages.size()) {
        throw std::invalid_argument("ppo_loss: minibatch and evaluation sizes differ");
    }
    LossBreakdown out;

    // Samples whose ratio cannot be formed are dropped from every term.
    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        bool ok = std::isfinite(eval.value.value()(i, 0));
        for (int l = 0; l < kNumLevels && ok; ++l) {
            if (!mb.active[i][l]) continue;
            const double r = std::exp(eval.log_prob.value()(i, l) - mb.old_log_prob[i][l]);
            ok = std::isfinite(r) && std::isfinite(eval.entropy.value()(i, l));
        }
        if (ok) keep.push_back(i);
    }
    out.dropped = n - static_cast<int>(keep.size());
    if (out.dropped > 0) spdlog::warn("ppo_loss: dropped {} samples with non-finite ratios", out.dropped);
    if (keep.empty()) {
        out.total = Tensor::scalar(0.0);
        return out;
    }
    const int m = static_cast<int>(keep.size());
    Tensor log_prob = out.dropped ? ad::gather_rows(eval.log_prob, keep) : eval.log_prob;
    Tensor entropy = out.dropped ? ad::gather_rows(eval.entropy, keep) : eval.entropy;
    Tensor value = out.dropped ? ad::gather_rows(eval.value, keep) : eval.value;

    Matrix adv(m, 1), ret(m, 1);
    for (int k = 0; k < m; ++k) {
        adv(k, 0) = mb.advantages[keep[k]];
        ret(k, 0) = mb.returns[keep[k]];
    }
    const Tensor adv_t = Tensor::constant(adv);

    std::vector<Tensor> terms;
    for (int l = 0; l < kNumLevels; ++l) {
        Matrix weight = Matrix::Zero(m, 1);
        Matrix old = Matrix::Zero(m, 1);
        int active = 0;
        for (int k = 0; k < m; ++k) {
            if (mb.active[keep[k]][l]) {
                weight(k, 0) = 1.0;
                old(k, 0) = mb.old_log_prob[keep[k]][l];
                ++active;
            }
        }
        if (active == 0) continue;
        weight /= static_cast<double>(active);
        const Tensor w = Tensor::constant(std::move(weight));

        Tensor ratio = ad::exp(ad::sub(ad::col(log_prob, l), Tensor::constant(std::move(old))));
        Tensor unclipped = ad::mul(ratio, adv_t);
        Tensor clipped = ad::mul(ad::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv_t);
        Tensor l_clip = ad::scale(ad::sum(ad::mul(ad::minimum(unclipped, clipped), w)), -1.0);
        Tensor h = ad::sum(ad::mul(ad::col(entropy, l), w));
        out.clip[l] = l_clip.item();
        out.entropy[l] = h.item();
        terms.push_back(ad::scale(l_clip, cfg.actor_weight[l]));
        terms.push_back(ad::scale(h, -cfg.entropy_weight[l]));
    }
    Tensor v_loss = ad::mean(ad::square(ad::sub(value, Tensor::constant(std::move(ret)))));
    out.value = v_loss.item();
    terms.push_back(ad::scale(v_loss, cfg.critic_weight));

    Tensor total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    out.total = total;
    return out;
}

PpoLearner::PpoLearner(Agent& agent, const PpoConfig& cfg, std::uint64_t seed)
    : agent_(agent), cfg_(cfg), adam_(agent.parameters(), cfg.learning_rate), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {}

UpdateStats PpoLearner::update(const std::vector<Transition>& batch) {
    UpdateStats stats;
    if (batch.empty()) return stats;
    const std::size_t n = batch.size();
    std::vector<double> rewards(n), values(n);
    std::vector<bool> dones(n);
    for (std::size_t i = 0; i < n; ++i) {
        rewards[i] = batch[i].reward * cfg_.reward_scale;
        values[i] = batch[i].value;
        dones[i] = batch[i].done;
    }
    const double bootstrap = batch.back().done ? 0.0 : agent_.value(batch.back().next_state);
    const GaeResult gae = compute_gae(rewards, values, dones, cfg_.gamma, cfg_.lambda, bootstrap);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto mb_size = static_cast<std::size_t>(cfg_.minibatch);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t start = 0; start < n; start += mb_size) {
            const std::size_t end = std::min(n, start + mb_size);
            std::vector<const FlowsheetGraph*> states;
            std::vector<Decision> decisions;
            Minibatch mb;
            std::vector<double> adv;
            for (std::size_t k = start; k < end; ++k) {
                const Transition& t = batch[order[k]];
                states.push_back(&t.state);
                decisions.push_back(t.decision);
                mb.active.push_back(t.active);
                mb.old_log_prob.push_back(t.log_prob);
                adv.push_back(gae.advantages[order[k]]);
                mb.returns.push_back(gae.returns[order[k]]);
            }
            mb.advantages = normalize(adv);
            const Evaluation eval = agent_.evaluate(states, decisions);
            LossBreakdown loss = ppo_loss(eval, mb, cfg_);
            agent_.parameters().zero_grad();
            loss.total.backward();
            if (!adam_.step()) ++stats.skipped;
            ++stats.minibatches;
            stats.loss += loss.total.item();
        }
    }
    if (stats.minibatches) stats.loss /= stats.minibatches;
    return stats;
}

ControlsFn controls_for(TrainMode mode, const Config& cfg) {
    switch (mode) {
        case TrainMode::Hybrid: return [](int, const FlowsheetGraph&) { return Controls{}; };
        case TrainMode::Discrete: {
            const std::array<double, kNumDesignHeads> pinned{cfg.fixed.reactor_length, cfg.fixed.hex_water_c,
                                                             cfg.fixed.column_d_to_f, cfg.fixed.recycle_ratio};
            return [pinned](int, const FlowsheetGraph&) {
                Controls c;
                c.pinned_design = pinned;
                return c;
            };
        }
        case TrainMode::Continuous:
            // Heat exchanger, reactor, column, recycle of the bottoms, then
            // every remaining open stream is sold.
            return [](int step, const FlowsheetGraph&) {
                static constexpr int kUnit[] = {1, 0, 2, 3};
                static constexpr int kLocation[] = {0, 0, 0, 1};
                Controls c;
                if (step < 4) {
                    c.unit = kUnit[step];
                    c.location_index = kLocation[step];
                } else {
                    c.unit = action_index(UnitKind::Product);
                    c.location_index = 0;
                }
                return c;
            };
    }
    throw std::invalid_argument("unknown train mode");
}

nn::Rng episode_rng(std::uint64_t seed, int episode) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(episode), 0x5eedu};
    return nn::Rng(seq);
}

EpisodeRecord run_episode(Environment& env, const Agent& agent, nn::Rng& rng, const ControlsFn& controls, int episode,
                          int max_steps) {
    EpisodeRecord rec;
    rec.episode = episode;
    FlowsheetGraph state = env.reset();
    for (int step = 0;; ++step) {
        if (step >= max_steps) throw std::logic_error("episode exceeded the step limit");
        const AgentOutput out = agent.act(state, rng, controls ? controls(step, state) : Controls{});
        StepResult res = env.step(out.action);
        Transition t;
        t.state = std::move(state);
        t.decision = out.decision;
        t.active = out.active;
        t.log_prob = out.log_prob;
        t.reward = res.reward;
        t.done = res.done;
        t.value = out.value;
        t.next_state = res.state;
        rec.transitions.push_back(std::move(t));
        rec.actions.push_back(out.action);
        if (res.done) {
            rec.score = res.reward;
            rec.outcome = res.outcome;
            rec.final_state = std::move(res.state);
            return rec;
        }
        state = std::move(res.state);
    }
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
    std::vector<double> out(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i];
        if (i >= window) acc -= v[i - window];
        out[i] = acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string version_string() { return FSRL_VERSION; }

namespace {

const char* outcome_name(Outcome::Kind k) {
    switch (k) {
        case Outcome::Kind::Completed: return "completed";
        case Outcome::Kind::SimFailure: return "sim_failure";
        case Outcome::Kind::TrivialSale: return "trivial_sale";
    }
    return "?";
}

json econ_json(const EconReport& r) {
    json units = json::array();
    for (const auto& u : r.units) {
        units.push_back({{"node", u.node}, {"kind", to_string(u.kind)}, {"utility", u.utility}, {"capital", u.capital}});
    }
    return {{"revenue", r.revenue},
            {"feed_cost", r.feed_cost},
            {"unit_cost", r.unit_cost},
            {"net_cash_flow", r.net_cash_flow},
            {"units", units}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

// Files of one training run.
class RunWriter {
public:
    RunWriter(const std::filesystem::path& dir, const Config& cfg, const TrainOptions& opts) : dir_(dir) {
        if (dir_.empty()) return;
        std::filesystem::create_directories(dir_ / "checkpoints");
        write_file(dir_ / "config.json", config_to_json(cfg) + "\n");
        json run = {{"version", version_string()},
                    {"seed", opts.seed},
                    {"mode", to_string(opts.mode)},
                    {"episodes", opts.episodes},
                    {"workers", opts.workers}};
        write_file(dir_ / "run.json", run.dump(2) + "\n");
        curve_.open(dir_ / "learning_curve.csv");
        curve_ << "episode,score,avg50\n";
        log_.open(dir_ / "episodes.jsonl");
    }

    bool enabled() const { return !dir_.empty(); }
    const std::filesystem::path& dir() const { return dir_; }

    void episode(const EpisodeRecord& rec, double avg50) {
        if (!enabled()) return;
        char line[128];
        std::snprintf(line, sizeof line, "%d,%.6f,%.6f\n", rec.episode + 1, rec.score, avg50);
        curve_ << line;
        for (std::size_t k = 0; k < rec.transitions.size(); ++k) {
            const Transition& t = rec.transitions[k];
            const ActionTriple& a = rec.actions[k];
            json j = {{"episode", rec.episode + 1},
                      {"step", k},
                      {"state_hash", hex64(fnv1a(t.state.to_json()))},
                      {"action",
                       {{"location", a.location},
                        {"unit", to_string(a.unit)},
                        {"design", a.design ? json(*a.design) : json(nullptr)},
                        {"physical", a.physical}}},
                      {"reward", t.reward},
                      {"done", t.done}};
            if (t.done && rec.outcome) {
                j["outcome"] = outcome_name(rec.outcome->kind);
                if (rec.outcome->kind == Outcome::Kind::Completed) j["econ"] = econ_json(rec.outcome->report);
            }
            log_ << j.dump() << '\n';
        }
    }

    void checkpoint(const Agent& agent, const std::string& name) {
        if (enabled()) write_file(dir_ / "checkpoints" / name, agent.parameters().to_json());
    }

    void finish(const Agent& agent, const TrainResult& result) {
        if (!enabled()) return;
        curve_.flush();
        log_.flush();
        write_file(dir_ / "checkpoint.json", agent.parameters().to_json());
        if (result.best_episode >= 0) {
            write_file(dir_ / "best_flowsheet.json", result.best_flowsheet.to_json() + "\n");
            write_file(dir_ / "best_flowsheet.dot", result.best_flowsheet.to_dot());
        }
    }

private:
    std::filesystem::path dir_;
    std::ofstream curve_;
    std::ofstream log_;
};

}  // namespace

TrainResult train(const Config& cfg, Agent& agent, const EnvFactory& make_env, const TrainOptions& opts) {
    if (opts.episodes < 1) throw std::invalid_argument("train: episodes must be >= 1");
    const int workers = std::max(1, opts.workers);
    const ControlsFn controls = opts.controls ? opts.controls : controls_for(opts.mode, cfg);

    std::vector<std::unique_ptr<Environment>> envs;
    for (int w = 0; w < workers; ++w) envs.push_back(make_env());

    PpoLearner learner(agent, cfg.ppo, opts.seed);
    TrajectoryMemory memory;
    RunWriter writer(opts.out_dir, cfg, opts);
    TrainResult result;
    double window = 0.0;

    for (int first = 0; first < opts.episodes; first += workers) {
        const int count = std::min(workers, opts.episodes - first);
        std::vector<EpisodeRecord> round(count);
        std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for num_threads(workers) schedule(static, 1) if (workers > 1)
        for (int i = 0; i < count; ++i) {
            try {
                nn::Rng rng = episode_rng(opts.seed, first + i);
                round[i] = run_episode(*envs[i], agent, rng, controls, first + i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }

        for (auto& rec : round) {
            const std::size_t idx = result.scores.size();
            result.scores.push_back(rec.score);
            window += rec.score;
            if (idx >= 50) window -= result.scores[idx - 50];
            const double avg = window / static_cast<double>(std::min<std::size_t>(idx + 1, 50));
            result.avg50.push_back(avg);
            const bool completed = rec.outcome && rec.outcome->kind == Outcome::Kind::Completed;
            if (completed && (result.best_episode < 0 || rec.score > result.best_score)) {
                result.best_score = rec.score;
                result.best_episode = rec.episode;
                result.best_flowsheet = rec.final_state;
            }
            writer.episode(rec, avg);
            for (auto& t : rec.transitions) memory.push(std::move(t));
            while (memory.size() >= static_cast<std::size_t>(cfg.ppo.batch)) {
                const UpdateStats s = learner.update(memory.take(static_cast<std::size_t>(cfg.ppo.batch)));
                ++result.updates;
                result.skipped_steps += s.skipped;
            }
            const int done_episodes = rec.episode + 1;
            if (opts.checkpoint_every > 0 && done_episodes % opts.checkpoint_every == 0) {
                writer.checkpoint(agent, "episode_" + std::to_string(done_episodes) + ".json");
            }
            if (opts.log_every > 0 && done_episodes % opts.log_every == 0) {
                spdlog::info("{} episode {}: avg50 {:.3f} Mio EUR/y, best {:.3f}", to_string(opts.mode), done_episodes,
                             avg * 1e-6, result.best_score * 1e-6);
            }
        }
    }
    writer.finish(agent, result);
    return result;
}

}  // namespace fsrl
