#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "fsrl/ppo.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fsrl;
using ad::Matrix;
using nn::Tensor;

namespace {

// Every episode is one step paying a fixed reward, whatever the action.
class OneStepEnv : public Environment {
public:
    explicit OneStepEnv(double reward) : reward_(reward) {}
    FlowsheetGraph reset() override { return new_flowsheet(fsrl::testing::default_feed()); }
    StepResult step(const ActionTriple&) override {
        EconReport r;
        r.net_cash_flow = reward_;
        return {reset(), reward_, true, Outcome::completed(r)};
    }

private:
    double reward_;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Evaluation constant_eval(const Matrix& lp, const Matrix& ent, const Matrix& val) {
    return {Tensor::parameter(lp), Tensor::parameter(ent), Tensor::parameter(val)};
}

std::vector<FlowsheetGraph> states_with_decisions(const Agent& agent, int n, std::vector<Decision>& decisions,
                                                  std::vector<AgentOutput>& outs) {
    FlowsheetEnv env;
    nn::Rng rng(101);
    std::vector<FlowsheetGraph> states;
    auto g = env.reset();
    while (static_cast<int>(states.size()) < n) {
        const auto o = agent.act(g, rng);
        states.push_back(g);
        decisions.push_back(o.decision);
        outs.push_back(o);
        const auto r = env.step(o.action);
        g = r.done ? env.reset() : r.state;
    }
    return states;
}

double cosine(const Matrix& a, const Matrix& b) {
    return (a.array() * b.array()).sum() / (a.norm() * b.norm());
}

Matrix flat_grad(const Agent& agent) {
    std::vector<double> all;
    for (const auto& [name, t] : agent.parameters().entries()) {
        const Matrix g = t.grad();
        all.insert(all.end(), g.data(), g.data() + g.size());
    }
    return Eigen::Map<Matrix>(all.data(), 1, static_cast<ad::Index>(all.size()));
}

}  // namespace

TEST_SUITE("ppo") {

TEST_CASE("GAE matches the explicit sum") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 17;
        std::vector<double> r(n), v(n);
        std::vector<bool> d(n);
        for (int t = 0; t < n; ++t) {
            r[t] = u(rng);
            v[t] = u(rng);
            d[t] = u(rng) > 0.6;
        }
        const double gamma = 0.5 + 0.5 * (u(rng) + 1.0) / 2.0, lambda = (u(rng) + 1.0) / 2.0, boot = u(rng);
        const auto got = compute_gae(r, v, d, gamma, lambda, boot);
        const auto want = fsrl::testing::gae_oracle(r, v, d, gamma, lambda, boot);
        for (int t = 0; t < n; ++t) {
            CHECK(std::abs(got.advantages[t] - want[t]) <= 1e-12);
            CHECK(got.returns[t] == doctest::Approx(want[t] + v[t]).epsilon(1e-12));
        }
    }
}

TEST_CASE("GAE limits") {
    const std::vector<double> r{0.0, 0.0, 3.0, 1.0, 2.0}, v{0.5, 1.0, 2.0, 0.1, 0.7};
    const std::vector<bool> d{false, false, true, false, false};
    // lambda = 0 is the one-step TD error.
    const auto td = compute_gae(r, v, d, 1.0, 0.0, 4.0);
    CHECK(td.advantages[0] == doctest::Approx(0.5));
    CHECK(td.advantages[2] == doctest::Approx(1.0));
    CHECK(td.advantages[4] == doctest::Approx(2.0 + 4.0 - 0.7));
    // lambda = 1, gamma = 1 is return minus baseline.
    const auto mc = compute_gae(r, v, d, 1.0, 1.0, 4.0);
    CHECK(mc.advantages[0] == doctest::Approx(3.0 - 0.5));
    CHECK(mc.advantages[1] == doctest::Approx(3.0 - 1.0));
    CHECK(mc.advantages[3] == doctest::Approx(1.0 + 2.0 + 4.0 - 0.1));
    CHECK(mc.returns[3] == doctest::Approx(7.0));
}

TEST_CASE("normalize") {
    const auto z = normalize({1.0, 2.0, 3.0, 6.0});
    CHECK(std::accumulate(z.begin(), z.end(), 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    double ss = 0.0;
    for (double x : z) ss += x * x;
    // The 1e-8 guard on the standard deviation shows up at that order.
    CHECK(ss / 4.0 == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(normalize({2.0, 2.0}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("clipped loss against a hand-computed two-sample case") {
    PpoConfig cfg;
    Matrix lp(2, 3), ent(2, 3), val(2, 1);
    lp << std::log(0.5), std::log(0.3), -0.2, std::log(0.9), std::log(0.1), 0.4;
    ent << 0.7, 1.2, -0.5, 0.3, 1.5, 0.1;
    val << 0.2, -0.4;
    Minibatch mb;
    mb.active = {{true, true, true}, {true, true, false}};
    mb.old_log_prob = {{std::log(0.4), std::log(0.2), -0.3}, {std::log(0.6), std::log(0.25), 0.0}};
    mb.advantages = {1.0, -1.0};
    mb.returns = {1.0, 0.0};
    const auto out = ppo_loss(constant_eval(lp, ent, val), mb, cfg);

    // Ratios: level 0 -> 1.25, 1.5; level 1 -> 1.5, 0.4; level 2 -> e^0.1.
    // min(r A, clip(r, 0.7, 1.3) A):
    //   level 0: min(1.25, 1.25) = 1.25 and min(-1.5, -1.3) = -1.5 -> mean -0.125
    //   level 1: min(1.5, 1.3) = 1.3 and min(-0.4, -0.7) = -0.7 -> mean 0.3
    //   level 2: e^0.1 = 1.10517, one active sample -> 1.10517
    const double l0 = -(-0.125), l1 = -0.3, l2 = -std::exp(0.1);
    CHECK(out.clip[0] == doctest::Approx(l0).epsilon(1e-10));
    CHECK(out.clip[1] == doctest::Approx(l1).epsilon(1e-10));
    CHECK(out.clip[2] == doctest::Approx(l2).epsilon(1e-10));
    CHECK(out.entropy[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.entropy[1] == doctest::Approx(1.35).epsilon(1e-12));
    CHECK(out.entropy[2] == doctest::Approx(-0.5).epsilon(1e-12));
    const double v = 0.5 * (0.8 * 0.8 + 0.4 * 0.4);
    CHECK(out.value == doctest::Approx(v).epsilon(1e-12));
    const double total = 0.1 * l0 + 1.0 * l1 + 0.5 * l2 + 0.2 * v - (0.001 * 0.5 + 0.3 * 1.35 + 0.001 * -0.5);
    CHECK(std::abs(out.total.item() - total) <= 1e-10);
}

TEST_CASE("identity ratio and zero advantages") {
    PpoConfig cfg;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 0.0);
    Matrix lp(4, 3), ent = Matrix::Zero(4, 3), val = Matrix::Zero(4, 1);
    Minibatch mb;
    for (int i = 0; i < 4; ++i) {
        for (int l = 0; l < 3; ++l) lp(i, l) = u(rng);
        mb.active.push_back({true, true, true});
        mb.old_log_prob.push_back({lp(i, 0), lp(i, 1), lp(i, 2)});
        mb.returns.push_back(0.0);
    }
    mb.advantages = {0.5, -1.0, 2.0, 0.25};
    const auto one = ppo_loss(constant_eval(lp, ent, val), mb, cfg);
    for (int l = 0; l < 3; ++l) CHECK(one.clip[l] == doctest::Approx(-0.4375).epsilon(1e-14));

    mb.advantages.assign(4, 0.0);
    const auto flat = ppo_loss(constant_eval(lp, ent, val), mb, cfg);
    for (int l = 0; l < 3; ++l) CHECK(flat.clip[l] == 0.0);
    CHECK(flat.total.item() == 0.0);
}

TEST_CASE("inactive levels do not contribute") {
    PpoConfig cfg;
    Matrix lp = Matrix::Constant(2, 3, -1.0), ent = Matrix::Constant(2, 3, 1.0), val = Matrix::Zero(2, 1);
    lp(0, 2) = std::numeric_limits<double>::quiet_NaN();  // never read
    Minibatch mb;
    mb.active = {{true, true, false}, {true, true, false}};
    mb.old_log_prob = {{-1.0, -1.0, 0.0}, {-1.0, -1.0, 0.0}};
    mb.advantages = {1.0, -1.0};
    mb.returns = {0.0, 0.0};
    const auto e = constant_eval(lp, ent, val);
    const auto out = ppo_loss(e, mb, cfg);
    CHECK(out.dropped == 0);
    CHECK(std::isfinite(out.total.item()));
    out.total.backward();
    CHECK(e.log_prob.grad().col(2).isZero(0.0));
    CHECK(e.entropy.grad().col(2).isZero(0.0));
}

TEST_CASE("at ratio one the clipped gradient is the vanilla policy gradient") {
    Agent agent(Config{}, 11);
    std::vector<Decision> decisions;
    std::vector<AgentOutput> outs;
    const auto states = states_with_decisions(agent, 12, decisions, outs);
    std::vector<const FlowsheetGraph*> ptrs;
    for (const auto& s : states) ptrs.push_back(&s);

    PpoConfig cfg;
    cfg.entropy_weight = {0.0, 0.0, 0.0};
    cfg.critic_weight = 0.0;
    cfg.actor_weight = {1.0, 1.0, 1.0};
    Minibatch mb;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    for (std::size_t i = 0; i < states.size(); ++i) {
        mb.active.push_back(outs[i].active);
        mb.old_log_prob.push_back(outs[i].log_prob);
        mb.advantages.push_back(n01(rng));
        mb.returns.push_back(0.0);
    }

    agent.parameters().zero_grad();
    ppo_loss(agent.evaluate(ptrs, decisions), mb, cfg).total.backward();
    const Matrix clipped = flat_grad(agent);

    // -sum_l mean_active(A log pi_l)
    agent.parameters().zero_grad();
    const Evaluation ev = agent.evaluate(ptrs, decisions);
    std::vector<Tensor> terms;
    for (int l = 0; l < kNumLevels; ++l) {
        Matrix w = Matrix::Zero(static_cast<ad::Index>(states.size()), 1);
        int active = 0;
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (mb.active[i][l]) {
                w(i, 0) = mb.advantages[i];
                ++active;
            }
        }
        if (active == 0) continue;
        terms.push_back(ad::scale(ad::sum(ad::mul(ad::col(ev.log_prob, l), Tensor::constant(w))), -1.0 / active));
    }
    Tensor vanilla = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) vanilla = ad::add(vanilla, terms[i]);
    vanilla.backward();
    const Matrix reference = flat_grad(agent);
    CHECK(reference.norm() > 0.0);
    CHECK(std::abs(cosine(clipped, reference) - 1.0) <= 1e-8);
    CHECK((clipped - reference).norm() <= 1e-10 * reference.norm());
}

TEST_CASE("loss does not depend on sample order within a minibatch") {
    Agent agent(Config{}, 13);
    std::vector<Decision> decisions;
    std::vector<AgentOutput> outs;
    const auto states = states_with_decisions(agent, 10, decisions, outs);
    const PpoConfig cfg;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    std::vector<double> adv, ret;
    for (std::size_t i = 0; i < states.size(); ++i) {
        adv.push_back(n01(rng));
        ret.push_back(n01(rng));
    }
    auto run = [&](const std::vector<std::size_t>& order) {
        std::vector<const FlowsheetGraph*> ptrs;
        std::vector<Decision> ds;
        Minibatch mb;
        for (std::size_t i : order) {
            ptrs.push_back(&states[i]);
            ds.push_back(decisions[i]);
            mb.active.push_back(outs[i].active);
            // Perturb the old policy so that some ratios clip.
            auto old = outs[i].log_prob;
            for (double& x : old) x += 0.4 * std::sin(static_cast<double>(i));
            mb.old_log_prob.push_back(old);
            mb.advantages.push_back(adv[i]);
            mb.returns.push_back(ret[i]);
        }
        agent.parameters().zero_grad();
        const auto loss = ppo_loss(agent.evaluate(ptrs, ds), mb, cfg);
        loss.total.backward();
        return std::make_pair(loss.total.item(), flat_grad(agent));
    };
    std::vector<std::size_t> order(states.size());
    std::iota(order.begin(), order.end(), 0);
    const auto [l1, g1] = run(order);
    std::shuffle(order.begin(), order.end(), rng);
    const auto [l2, g2] = run(order);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    CHECK((g1 - g2).norm() <= 1e-10 * g1.norm());
}

TEST_CASE("critic learns the value of a one-step environment") {
    Config cfg;
    cfg.ppo.learning_rate = 0.01;
    cfg.ppo.batch = 10;
    cfg.ppo.minibatch = 5;
    Agent agent(cfg, 19);
    TrainOptions opts;
    opts.episodes = 200;
    opts.seed = 19;
    opts.log_every = 0;
    const auto r = train(cfg, agent, [] { return std::make_unique<OneStepEnv>(1e6); }, opts);
    CHECK(r.scores.size() == 200);
    CHECK(r.best_score == 1e6);
    CHECK(std::abs(agent.value(new_flowsheet(fsrl::testing::default_feed())) - 1.0) <= 0.01);
}

TEST_CASE("run directory contents are complete and reproducible") {
    const auto root = std::filesystem::temp_directory_path() / ("fsrl_run_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root);
    auto run = [&](const std::string& name) {
        Config cfg;
        cfg.ppo.batch = 8;
        cfg.ppo.minibatch = 4;
        Agent agent(cfg, 23);
        TrainOptions opts;
        opts.mode = TrainMode::Hybrid;
        opts.episodes = 12;
        opts.seed = 23;
        opts.checkpoint_every = 6;
        opts.out_dir = root / name;
        opts.log_every = 0;
        return train(cfg, agent, [cfg] { return std::make_unique<FlowsheetEnv>(cfg); }, opts);
    };
    const auto a = run("a");
    const auto b = run("b");
    for (const char* f : {"config.json", "run.json", "learning_curve.csv", "episodes.jsonl", "checkpoint.json",
                          "best_flowsheet.json", "best_flowsheet.dot"}) {
        INFO(f);
        CHECK(std::filesystem::exists(root / "a" / f));
    }
    CHECK(std::filesystem::exists(root / "a" / "checkpoints" / "episode_6.json"));
    CHECK(std::filesystem::exists(root / "a" / "checkpoints" / "episode_12.json"));

    const std::string curve = slurp(root / "a" / "learning_curve.csv");
    CHECK(curve == slurp(root / "b" / "learning_curve.csv"));
    CHECK(slurp(root / "a" / "episodes.jsonl") == slurp(root / "b" / "episodes.jsonl"));
    CHECK(curve.rfind("episode,score,avg50\n", 0) == 0);
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 13);
    CHECK(a.scores == b.scores);

    // The best flowsheet reloads and re-simulates to the recorded score.
    const auto best = FlowsheetGraph::from_json(slurp(root / "a" / "best_flowsheet.json"));
    CHECK(best == a.best_flowsheet);
    std::filesystem::remove_all(root);
}

TEST_CASE("moving average") {
    const auto m = moving_average({1, 2, 3, 4, 5}, 2);
    CHECK(m == std::vector<double>{1.0, 1.5, 2.5, 3.5, 4.5});
}

TEST_CASE("train modes") {
    CHECK(parse_mode("discrete") == TrainMode::Discrete);
    CHECK(parse_mode("hybrid") == TrainMode::Hybrid);
    CHECK_THROWS_AS(parse_mode("bogus"), std::invalid_argument);
    CHECK(std::string(to_string(TrainMode::Continuous)) == "continuous");
}

}  // TEST_SUITE
