#pragma once

// Configuration for the whole framework. Every physical constant, price and
// hyperparameter lives here; config/default.json is the canonical file and
// mirrors the in-code defaults below.

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace fsrl {

inline constexpr std::size_t kNumComponents = 4;  // MeOAc, MeOH, HOAc, H2O

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AzeotropeData {
    std::array<double, kNumComponents> x{};
    double boiling_point_c = 0.0;
};

// Arrhenius forward rate and van't Hoff equilibrium constant.
//   k_f(T)  = prefactor * exp(-activation_energy / (R T))     [mol/(m^3 s)]
//   K_eq(T) = keq_prefactor * exp(keq_temperature_coeff / T)
struct KineticParams {
    double prefactor = 6.35e9;
    double activation_energy = 52276.0;  // J/mol
    double keq_prefactor = 2.32;
    double keq_temperature_coeff = 782.98;  // K
};

struct ThermoConfig {
    std::array<double, kNumComponents> boiling_point_c{56.9, 64.7, 118.1, 100.0};
    AzeotropeData az_meoac_meoh{{0.66, 0.34, 0.0, 0.0}, 53.8};
    AzeotropeData az_meoac_h2o{{0.89, 0.0, 0.0, 0.11}, 56.4};
    KineticParams kinetics{};
    double min_reaction_temperature_k = 278.0;
    double max_reaction_temperature_k = 400.0;
};

struct ReactorConfig {
    double area_per_flow = 0.1;  // m^2 s / mol
    double min_length = 0.05;    // m
    double max_length = 20.0;    // m
    int rk4_steps = 200;
};

struct HexConfig {
    double heat_transfer_coefficient = 568.0;  // W/(K m^2)
    double approach_temperature = 5.0;         // K
    double water_delta_t = 10.0;               // K
    double min_water_inlet_c = 5.0;
    double max_water_inlet_c = 53.8;
    std::array<double, kNumComponents> cp_liquid{141.9, 81.1, 123.1, 75.3};  // J/(mol K)
};

struct ColumnConfig {
    double min_d_to_f = 0.05;
    double max_d_to_f = 0.95;
    double effective_reflux = 1.5;
    double heat_of_vaporization = 35000.0;  // J/mol, reboiler duty per mol vapor
};

struct SimulationConfig {
    double tolerance = 1e-8;
    int max_iter = 200;
    double q_min = -5.0;
    double q_max = 0.9;
};

struct FeatureConfig {
    double t_min_c = 5.0;
    double t_max_c = 200.0;
    double feed_flow_scale = 100.0;  // mol/s
};

struct PriceModel {
    std::array<double, kNumComponents> base_price{0.074, 0.0128, 0.036, 0.0};  // EUR/mol
    double steepness = 20.0;
    double midpoint = 0.55;
    double seconds_per_year = 8000.0 * 3600.0;
};

struct CapitalLaw {
    double a = 0.0;
    double b = 1.0;
};

struct CostModel {
    CapitalLaw reactor{400000.0, 0.6};    // basis: volume m^3
    CapitalLaw hex{30000.0, 0.65};        // basis: area m^2
    CapitalLaw column{200000.0, 0.6};     // basis: vapor load mol/s
    double splitter_capital = 20000.0;    // EUR
    double mixer_capital = 20000.0;       // EUR
    double heating_price = 5e-9;          // EUR/J
    double cooling_price = 5e-10;         // EUR/J
    double capital_charge = 0.15;         // 1/y
};

struct FeedConfig {
    double temperature_c = 27.0;
    double flow = 100.0;  // mol/s
    std::array<double, kNumComponents> x{0.0, 0.5, 0.5, 0.0};
};

struct EnvConfig {
    int max_units = 25;
    double failure_penalty = -10'000'000.0;
    double negative_scale = 10.0;
    FeedConfig feed{};
};

struct AgentConfig {
    int node_embedding = 24;
    int message_hidden = 10;
    int message_steps = 6;
    int fingerprint = 50;
    int level1_hidden = 12;
    int level2_hidden = 256;
    int level3_hidden = 256;
    int critic_hidden = 256;
    int location_capacity = 64;
    std::string activation = "tanh";  // hidden activation: tanh | relu
};

struct PpoConfig {
    double learning_rate = 0.0002;
    double clip = 0.3;
    double gamma = 1.0;
    double lambda = 0.95;
    int batch = 60;
    int minibatch = 30;
    int epochs = 4;
    std::array<double, 3> actor_weight{0.1, 1.0, 0.5};   // c0, c1, c2
    double critic_weight = 0.2;                          // c3
    std::array<double, 3> entropy_weight{0.001, 0.3, 0.001};  // d1, d2, d3
    double reward_scale = 1e-6;  // EUR/y -> Mio EUR/y inside the learner
};

// Fixed design values used when the continuous decision is disabled.
struct FixedDesign {
    double hex_water_c = 32.0;
    double reactor_length = 10.0;
    double column_d_to_f = 0.5;
    double recycle_ratio = 0.9;
};

struct Config {
    ThermoConfig thermo{};
    ReactorConfig reactor{};
    HexConfig hex{};
    ColumnConfig column{};
    SimulationConfig simulation{};
    FeatureConfig features{};
    PriceModel prices{};
    CostModel costs{};
    EnvConfig env{};
    AgentConfig agent{};
    PpoConfig ppo{};
    FixedDesign fixed{};
};

// Throws ConfigError on unknown keys, wrong types or violated invariants.
// Comments (// and /* */) are accepted in config text.
Config config_from_json(const std::string& text);
std::string config_to_json(const Config& cfg);
Config load_config(const std::filesystem::path& path);
void validate(const Config& cfg);

// Path of the shipped default.json (absolute, baked in at build time).
std::filesystem::path default_config_path();

}  // namespace fsrl
