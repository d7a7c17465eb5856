#pragma once

// Forward simulation of batting careers from the full generative model.
//
// For each innings: v ~ Ga(eta, rate eta), X ~ Po(lambda v), X is set to 0
// with probability pi, then with probability censor_prob the innings is
// recorded not out at floor(U X), U ~ U(0, 1).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "batrank/ingest.hpp"
#include "batrank/model.hpp"

namespace batrank {

struct SimScenario {
    ParamState truth;  // dims fix P, Y, D and O
    int first_year = 1950;
    std::vector<std::string> player_ids;
    std::vector<std::string> opposition_labels;  // sorted; [0] is the reference
    std::vector<std::size_t> career_start;       // year index of debut
    std::vector<std::size_t> career_length;      // years, >= 1
    std::vector<double> debut_age;
    double innings_per_year = 8.0;  // mean; every career year has at least one innings
    double away_prob = 0.5;
    double censor_prob = 0.1;
    std::uint64_t seed = 1;

    // Throws std::invalid_argument.
    void check() const;
    std::size_t players() const { return player_ids.size(); }
};

struct SimResult {
    Dataset dataset;
    ParamState truth;  // reordered to the dataset's player order
};

SimResult simulate_dataset(const SimScenario& scn);

// File-level description of a scenario. Unset truth entries are drawn from
// the priors; set ones are used for every player.
struct ScenarioSpec {
    std::size_t players = 60;
    int first_year = 1950;
    std::size_t years = 30;
    std::size_t oppositions = 6;
    double innings_per_year = 8.0;
    std::size_t min_career = 3;
    std::size_t max_career = 12;
    double min_debut_age = 19.0;
    double max_debut_age = 26.0;
    double away_prob = 0.5;
    double censor_prob = 0.12;
    std::uint64_t seed = 1;

    std::optional<double> mu_theta, sigma2_theta, sigma2_delta;
    std::optional<double> alpha1, alpha2, eta, pi;
    std::optional<double> zeta2;
    std::optional<std::vector<double>> nu;  // three entries
    std::optional<double> game_effect_sd;   // spread of xi and omega draws

    void check() const;
};

// The built-in demo scenario: prior draws for abilities and year effects,
// realistic fixed ageing curvature and game effects.
ScenarioSpec default_scenario();

// JSON object with the ScenarioSpec field names; unknown keys are rejected.
ScenarioSpec parse_scenario(const std::string& json_text);
ScenarioSpec load_scenario(const std::filesystem::path& path);

SimScenario make_scenario(const ScenarioSpec& spec, const PriorConfig& prior = {});

}  // namespace batrank
