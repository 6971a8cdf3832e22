#include "doctest.h"
#include "fsrl/config.hpp"

using namespace fsrl;

TEST_SUITE("config") {

TEST_CASE("shipped defaults equal the built-in defaults") {
    const Config shipped = load_config(default_config_path());
    CHECK(config_to_json(shipped) == config_to_json(Config{}));
}

TEST_CASE("JSON round trip") {
    Config c;
    c.ppo.learning_rate = 1e-3;
    c.env.max_units = 12;
    c.prices.midpoint = 0.6;
    const Config back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.ppo.learning_rate == 1e-3);
}

TEST_CASE("partial configs fill in defaults") {
    const Config c = config_from_json(R"({"ppo": {"clip": 0.2}})");
    CHECK(c.ppo.clip == 0.2);
    CHECK(c.ppo.batch == 60);
}

TEST_CASE("comments are accepted") {
    const Config c = config_from_json("// top\n{ /* inline */ \"ppo\": {\"epochs\": 3} }\n");
    CHECK(c.ppo.epochs == 3);
}

TEST_CASE("bad configs are rejected") {
    CHECK_THROWS_AS(config_from_json("{"), ConfigError);
    CHECK_THROWS_AS(config_from_json("[]"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"ppo": {"clip_ratio": 0.2}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"nonsense": 1})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"ppo": {"batch": "sixty"}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"ppo": {"batch": 2.5}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"ppo": {"batch": 0}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"ppo": {"clip": -0.1}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"reactor": {"min_length": 30.0}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"env": {"feed": {"x": [0.5, 0.5, 0.5, 0.0]}}})"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

}  // TEST_SUITE
