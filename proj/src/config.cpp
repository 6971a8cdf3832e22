#include "fsrl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#ifndef FSRL_DEFAULT_CONFIG
#define FSRL_DEFAULT_CONFIG "config/default.json"
#endif

namespace fsrl {

using nlohmann::json;

namespace {

// Reads fields present in a JSON object; absent keys keep their current value.
class Reader {
public:
    explicit Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected object");
    }

    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
        }
    }

    template <class T>
    void field(const char* name, T& value) {
        seen_.insert(name);
        auto it = j_.find(name);
        if (it == j_.end()) return;
        try {
            if constexpr (std::is_same_v<T, int>) {
                if (!it->is_number_integer()) throw ConfigError("expected integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw ConfigError("expected number");
            }
            value = it->template get<T>();
        } catch (const std::exception& e) {
            throw ConfigError(path_ + "." + name + ": " + e.what());
        }
    }

    template <class F>
    void section(const char* name, F&& body) {
        seen_.insert(name);
        auto it = j_.find(name);
        if (it == j_.end()) return;
        Reader sub(*it, path_ + "." + name);
        body(sub);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

class Writer {
public:
    explicit Writer(json& j) : j_(j) { j_ = json::object(); }

    template <class T>
    void field(const char* name, T& value) { j_[name] = value; }

    template <class F>
    void section(const char* name, F&& body) {
        Writer sub(j_[name]);
        body(sub);
    }

private:
    json& j_;
};

template <class V>
void visit_azeotrope(V& v, AzeotropeData& a) {
    v.field("x", a.x);
    v.field("boiling_point_c", a.boiling_point_c);
}

template <class V>
void visit_law(V& v, CapitalLaw& law) {
    v.field("a", law.a);
    v.field("b", law.b);
}

template <class V>
void visit(V& v, Config& c) {
    v.section("thermo", [&](V& s) {
        s.field("boiling_point_c", c.thermo.boiling_point_c);
        s.section("az_meoac_meoh", [&](V& a) { visit_azeotrope(a, c.thermo.az_meoac_meoh); });
        s.section("az_meoac_h2o", [&](V& a) { visit_azeotrope(a, c.thermo.az_meoac_h2o); });
        s.section("kinetics", [&](V& k) {
            k.field("prefactor", c.thermo.kinetics.prefactor);
            k.field("activation_energy", c.thermo.kinetics.activation_energy);
            k.field("keq_prefactor", c.thermo.kinetics.keq_prefactor);
            k.field("keq_temperature_coeff", c.thermo.kinetics.keq_temperature_coeff);
        });
        s.field("min_reaction_temperature_k", c.thermo.min_reaction_temperature_k);
        s.field("max_reaction_temperature_k", c.thermo.max_reaction_temperature_k);
    });
    v.section("reactor", [&](V& s) {
        s.field("area_per_flow", c.reactor.area_per_flow);
        s.field("min_length", c.reactor.min_length);
        s.field("max_length", c.reactor.max_length);
        s.field("rk4_steps", c.reactor.rk4_steps);
    });
    v.section("hex", [&](V& s) {
        s.field("heat_transfer_coefficient", c.hex.heat_transfer_coefficient);
        s.field("approach_temperature", c.hex.approach_temperature);
        s.field("water_delta_t", c.hex.water_delta_t);
        s.field("min_water_inlet_c", c.hex.min_water_inlet_c);
        s.field("max_water_inlet_c", c.hex.max_water_inlet_c);
        s.field("cp_liquid", c.hex.cp_liquid);
    });
    v.section("column", [&](V& s) {
        s.field("min_d_to_f", c.column.min_d_to_f);
        s.field("max_d_to_f", c.column.max_d_to_f);
        s.field("effective_reflux", c.column.effective_reflux);
        s.field("heat_of_vaporization", c.column.heat_of_vaporization);
    });
    v.section("simulation", [&](V& s) {
        s.field("tolerance", c.simulation.tolerance);
        s.field("max_iter", c.simulation.max_iter);
        s.field("q_min", c.simulation.q_min);
        s.field("q_max", c.simulation.q_max);
    });
    v.section("features", [&](V& s) {
        s.field("t_min_c", c.features.t_min_c);
        s.field("t_max_c", c.features.t_max_c);
        s.field("feed_flow_scale", c.features.feed_flow_scale);
    });
    v.section("prices", [&](V& s) {
        s.field("base_price", c.prices.base_price);
        s.field("steepness", c.prices.steepness);
        s.field("midpoint", c.prices.midpoint);
        s.field("seconds_per_year", c.prices.seconds_per_year);
    });
    v.section("costs", [&](V& s) {
        s.section("reactor", [&](V& l) { visit_law(l, c.costs.reactor); });
        s.section("hex", [&](V& l) { visit_law(l, c.costs.hex); });
        s.section("column", [&](V& l) { visit_law(l, c.costs.column); });
        s.field("splitter_capital", c.costs.splitter_capital);
        s.field("mixer_capital", c.costs.mixer_capital);
        s.field("heating_price", c.costs.heating_price);
        s.field("cooling_price", c.costs.cooling_price);
        s.field("capital_charge", c.costs.capital_charge);
    });
    v.section("env", [&](V& s) {
        s.field("max_units", c.env.max_units);
        s.field("failure_penalty", c.env.failure_penalty);
        s.field("negative_scale", c.env.negative_scale);
        s.section("feed", [&](V& f) {
            f.field("temperature_c", c.env.feed.temperature_c);
            f.field("flow", c.env.feed.flow);
            f.field("x", c.env.feed.x);
        });
    });
    v.section("agent", [&](V& s) {
        s.field("node_embedding", c.agent.node_embedding);
        s.field("message_hidden", c.agent.message_hidden);
        s.field("message_steps", c.agent.message_steps);
        s.field("fingerprint", c.agent.fingerprint);
        s.field("level1_hidden", c.agent.level1_hidden);
        s.field("level2_hidden", c.agent.level2_hidden);
        s.field("level3_hidden", c.agent.level3_hidden);
        s.field("critic_hidden", c.agent.critic_hidden);
        s.field("location_capacity", c.agent.location_capacity);
        s.field("activation", c.agent.activation);
    });
    v.section("ppo", [&](V& s) {
        s.field("learning_rate", c.ppo.learning_rate);
        s.field("clip", c.ppo.clip);
        s.field("gamma", c.ppo.gamma);
        s.field("lambda", c.ppo.lambda);
        s.field("batch", c.ppo.batch);
        s.field("minibatch", c.ppo.minibatch);
        s.field("epochs", c.ppo.epochs);
        s.field("actor_weight", c.ppo.actor_weight);
        s.field("critic_weight", c.ppo.critic_weight);
        s.field("entropy_weight", c.ppo.entropy_weight);
        s.field("reward_scale", c.ppo.reward_scale);
    });
    v.section("fixed_design", [&](V& s) {
        s.field("hex_water_c", c.fixed.hex_water_c);
        s.field("reactor_length", c.fixed.reactor_length);
        s.field("column_d_to_f", c.fixed.column_d_to_f);
        s.field("recycle_ratio", c.fixed.recycle_ratio);
    });
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
}

bool is_composition(const std::array<double, kNumComponents>& x) {
    double sum = 0.0;
    for (double v : x) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) < 1e-9;
}

}  // namespace

void validate(const Config& c) {
    require(is_composition(c.thermo.az_meoac_meoh.x), "az_meoac_meoh composition");
    require(is_composition(c.thermo.az_meoac_h2o.x), "az_meoac_h2o composition");
    require(c.thermo.kinetics.prefactor >= 0.0, "kinetic prefactor must be >= 0");
    require(c.thermo.kinetics.keq_prefactor > 0.0, "keq_prefactor must be > 0");
    require(c.thermo.min_reaction_temperature_k < c.thermo.max_reaction_temperature_k,
            "reaction temperature range");
    require(c.reactor.area_per_flow > 0.0, "area_per_flow");
    require(c.reactor.min_length > 0.0 && c.reactor.min_length < c.reactor.max_length, "reactor length range");
    require(c.reactor.rk4_steps >= 100, "rk4_steps must be >= 100");
    require(c.hex.heat_transfer_coefficient > 0.0, "heat transfer coefficient");
    require(c.hex.approach_temperature > 0.0, "approach temperature");
    require(c.hex.water_delta_t > 0.0, "water_delta_t");
    require(c.hex.min_water_inlet_c < c.hex.max_water_inlet_c, "water inlet range");
    for (double cp : c.hex.cp_liquid) require(cp > 0.0, "cp_liquid");
    require(c.column.min_d_to_f > 0.0 && c.column.max_d_to_f < 1.0 && c.column.min_d_to_f < c.column.max_d_to_f,
            "column D/F range");
    require(c.column.effective_reflux >= 0.0, "effective_reflux");
    require(c.simulation.tolerance > 0.0, "simulation tolerance");
    require(c.simulation.max_iter >= 2, "max_iter");
    require(c.simulation.q_min < c.simulation.q_max && c.simulation.q_max < 1.0, "wegstein q bounds");
    require(c.features.t_min_c < c.features.t_max_c && c.features.feed_flow_scale > 0.0, "feature scaling");
    for (double p : c.prices.base_price) require(p >= 0.0, "prices must be >= 0");
    require(c.prices.steepness > 0.0, "price steepness");
    require(c.prices.midpoint > 0.0 && c.prices.midpoint < 1.0, "price midpoint");
    require(c.prices.seconds_per_year > 0.0, "seconds_per_year");
    for (const CapitalLaw* law : {&c.costs.reactor, &c.costs.hex, &c.costs.column})
        require(law->a > 0.0 && law->b > 0.0, "capital law coefficients");
    require(c.costs.capital_charge == 0.15, "capital charge factor must be 0.15");
    require(c.costs.heating_price >= 0.0 && c.costs.cooling_price >= 0.0, "utility prices");
    require(c.env.max_units >= 1, "max_units");
    require(c.env.negative_scale > 0.0, "negative_scale");
    require(is_composition(c.env.feed.x), "feed composition");
    require(c.env.feed.flow >= 0.0, "feed flow");
    require(c.agent.message_steps >= 1 && c.agent.node_embedding >= 1 && c.agent.fingerprint >= 1,
            "agent widths");
    require(c.agent.location_capacity >= 1, "location capacity");
    require(c.agent.activation == "tanh" || c.agent.activation == "relu", "activation must be tanh or relu");
    require(c.ppo.batch >= 1 && c.ppo.minibatch >= 1 && c.ppo.batch % c.ppo.minibatch == 0, "minibatch must divide batch");
    require(c.ppo.clip > 0.0 && c.ppo.lambda >= 0.0 && c.ppo.lambda <= 1.0, "clip/lambda");
    require(c.ppo.gamma > 0.0 && c.ppo.gamma <= 1.0, "gamma");
    require(c.ppo.epochs >= 1 && c.ppo.learning_rate > 0.0, "epochs/learning rate");
    require(c.ppo.reward_scale > 0.0, "reward_scale");
}

Config config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    Config cfg;
    {
        Reader r(j, "config");
        visit(r, cfg);
    }
    validate(cfg);
    return cfg;
}

std::string config_to_json(const Config& cfg) {
    json j;
    Config copy = cfg;
    Writer w(j);
    visit(w, copy);
    return j.dump(2);
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::filesystem::path default_config_path() { return FSRL_DEFAULT_CONFIG; }

}  // namespace fsrl
