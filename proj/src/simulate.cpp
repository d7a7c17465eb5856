#include "batrank/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "batrank/gmrf.hpp"
#include "batrank/parallel.hpp"
#include "batrank/rng.hpp"

namespace batrank {

namespace {

// Stream labels for simulation; disjoint from the sampler's (they start at 100).
enum : std::uint64_t { kSimInnings = 100, kSimTruth = 101, kSimCareer = 102 };

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("scenario: " + what);
}

int floor_decade(int y) { return (y >= 0 ? y : y - 9) / 10; }

std::string padded_id(const char* prefix, std::size_t i, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n).size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i + 1);
    return buf;
}

}  // namespace

void SimScenario::check() const {
    const std::size_t p = players();
    const Dims d = truth.dims();
    require(truth.theta.size() == p, "truth has " + std::to_string(truth.theta.size()) + " players, expected " +
                                         std::to_string(p));
    require(career_start.size() == p && career_length.size() == p && debut_age.size() == p,
            "career vectors must have one entry per player");
    require(opposition_labels.size() == d.oppositions, "opposition labels do not match truth");
    require(std::is_sorted(opposition_labels.begin(), opposition_labels.end()), "opposition labels must be sorted");
    require(censor_prob >= 0.0 && censor_prob < 1.0, "censor_prob must lie in [0, 1)");
    require(away_prob >= 0.0 && away_prob <= 1.0, "away_prob must lie in [0, 1]");
    require(innings_per_year >= 1.0, "innings_per_year must be at least 1");
    const int last = first_year + static_cast<int>(d.years) - 1;
    require(static_cast<std::size_t>(floor_decade(last) - floor_decade(first_year) + 1) == d.decades,
            "truth decade count does not match the year span");
    for (std::size_t i = 0; i < p; ++i) {
        require(career_length[i] >= 1, "career lengths must be positive");
        require(career_start[i] + career_length[i] <= d.years, "career of " + player_ids[i] + " overruns the years");
        const double last_age = debut_age[i] + static_cast<double>(career_length[i]);
        require(debut_age[i] > 10.0 && last_age < 60.0, "ages must stay inside (10, 60)");
        require(truth.eta[i] > 0.0, "eta must be positive");
        require(truth.pi[i] >= 0.0 && truth.pi[i] <= 1.0, "pi must lie in [0, 1]");
    }
}

SimResult simulate_dataset(const SimScenario& scn) {
    scn.check();
    const std::size_t p = scn.players();
    const Dims dims = scn.truth.dims();

    // Each player's rows from its own stream; concatenated in player order.
    std::vector<std::vector<RawInnings>> rows(p);
    parallel_for(Exec::parallel, p, [&](std::size_t i) {
        Rng rng = Rng::stream(scn.seed, {kSimInnings, i});
        const double eta = scn.truth.eta[i];
        const double pi = scn.truth.pi[i];
        for (std::size_t k = 0; k < scn.career_length[i]; ++k) {
            const std::size_t y = scn.career_start[i] + k;
            const int year = scn.first_year + static_cast<int>(y);
            const auto n = 1 + rng.poisson(scn.innings_per_year - 1.0);
            for (std::int64_t j = 0; j < n; ++j) {
                RawInnings r;
                r.player = scn.player_ids[i];
                r.year = year;
                r.age = scn.debut_age[i] + static_cast<double>(k) + rng.uniform();
                r.venue = rng.bernoulli(scn.away_prob) ? Venue::away : Venue::home;
                r.match_innings = 1 + static_cast<int>(rng.uniform() * 4.0);
                const auto q = static_cast<std::size_t>(rng.uniform() * static_cast<double>(dims.oppositions));
                r.opposition = scn.opposition_labels[q];

                InningsRecord rec;
                rec.player = i;
                rec.year = y;
                rec.decade = static_cast<std::size_t>(floor_decade(year) - floor_decade(scn.first_year));
                rec.age = r.age;
                rec.venue = r.venue;
                rec.match_innings = r.match_innings;
                rec.opposition = q;
                const double lambda = std::exp(log_rate(scn.truth, rec));
                const double v = rng.gamma(eta, 1.0 / eta);
                auto x = rng.poisson(lambda * v);
                if (rng.bernoulli(pi)) x = 0;
                if (rng.bernoulli(scn.censor_prob)) {
                    x = static_cast<std::int64_t>(std::floor(rng.uniform() * static_cast<double>(x)));
                    r.not_out = true;
                }
                r.runs = static_cast<int>(std::min<std::int64_t>(x, 1'000'000));
                rows[i].push_back(std::move(r));
            }
        }
    });

    std::vector<RawInnings> all;
    for (auto& v : rows) all.insert(all.end(), v.begin(), v.end());

    BuildOptions opts;
    opts.oppositions = scn.opposition_labels;
    opts.first_year = scn.first_year;
    opts.last_year = scn.first_year + static_cast<int>(dims.years) - 1;
    opts.extra_players = scn.player_ids;

    SimResult out;
    out.dataset = build_dataset(all, opts);

    // Align per-player truth with the dataset's player order.
    out.truth = scn.truth;
    std::vector<std::size_t> src(p);
    for (std::size_t i = 0; i < p; ++i) src[out.dataset.player_index.at(scn.player_ids[i])] = i;
    auto permute = [&](std::vector<double>& v, const std::vector<double>& from) {
        for (std::size_t j = 0; j < p; ++j) v[j] = from[src[j]];
    };
    permute(out.truth.theta, scn.truth.theta);
    permute(out.truth.alpha1, scn.truth.alpha1);
    permute(out.truth.alpha2, scn.truth.alpha2);
    permute(out.truth.eta, scn.truth.eta);
    permute(out.truth.pi, scn.truth.pi);
    return out;
}

void ScenarioSpec::check() const {
    require(players >= 1, "players must be positive");
    require(years >= 1, "years must be positive");
    require(oppositions >= 1, "oppositions must be positive");
    require(min_career >= 1 && min_career <= max_career, "need 1 <= min_career <= max_career");
    require(max_career <= years, "max_career exceeds the number of years");
    require(min_debut_age > 10.0 && min_debut_age <= max_debut_age, "invalid debut age range");
    require(max_debut_age + static_cast<double>(max_career) < 60.0, "careers would end after age 60");
    require(innings_per_year >= 1.0, "innings_per_year must be at least 1");
    require(censor_prob >= 0.0 && censor_prob < 1.0, "censor_prob must lie in [0, 1)");
    require(away_prob >= 0.0 && away_prob <= 1.0, "away_prob must lie in [0, 1]");
    if (nu) require(nu->size() == 3, "nu needs three entries");
    if (sigma2_theta) require(*sigma2_theta > 0.0, "sigma2_theta must be positive");
    if (sigma2_delta) require(*sigma2_delta > 0.0, "sigma2_delta must be positive");
    if (alpha2) require(*alpha2 > 0.0, "alpha2 must be positive");
    if (eta) require(*eta > 0.0, "eta must be positive");
    if (pi) require(*pi >= 0.0 && *pi <= 1.0, "pi must lie in [0, 1]");
    if (game_effect_sd) require(*game_effect_sd >= 0.0, "game_effect_sd must be non-negative");
}

ScenarioSpec default_scenario() {
    ScenarioSpec s;
    s.alpha2 = 0.004;
    s.zeta2 = std::log(0.9);
    s.nu = std::vector<double>{std::log(0.95), std::log(0.90), std::log(0.84)};
    s.game_effect_sd = 0.1;
    return s;
}

ScenarioSpec parse_scenario(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario: invalid JSON: ") + e.what());
    }
    require(j.is_object(), "top level must be a JSON object");
    ScenarioSpec s = default_scenario();
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "players") s.players = v.get<std::size_t>();
            else if (key == "first_year") s.first_year = v.get<int>();
            else if (key == "years") s.years = v.get<std::size_t>();
            else if (key == "oppositions") s.oppositions = v.get<std::size_t>();
            else if (key == "innings_per_year") s.innings_per_year = v.get<double>();
            else if (key == "min_career") s.min_career = v.get<std::size_t>();
            else if (key == "max_career") s.max_career = v.get<std::size_t>();
            else if (key == "min_debut_age") s.min_debut_age = v.get<double>();
            else if (key == "max_debut_age") s.max_debut_age = v.get<double>();
            else if (key == "away_prob") s.away_prob = v.get<double>();
            else if (key == "censor_prob") s.censor_prob = v.get<double>();
            else if (key == "seed") s.seed = v.get<std::uint64_t>();
            else if (key == "mu_theta") s.mu_theta = v.get<double>();
            else if (key == "sigma2_theta") s.sigma2_theta = v.get<double>();
            else if (key == "sigma2_delta") s.sigma2_delta = v.get<double>();
            else if (key == "alpha1") s.alpha1 = v.get<double>();
            else if (key == "alpha2") s.alpha2 = v.is_null() ? std::nullopt : std::optional(v.get<double>());
            else if (key == "eta") s.eta = v.get<double>();
            else if (key == "pi") s.pi = v.get<double>();
            else if (key == "zeta2") s.zeta2 = v.is_null() ? std::nullopt : std::optional(v.get<double>());
            else if (key == "nu") s.nu = v.is_null() ? std::nullopt : std::optional(v.get<std::vector<double>>());
            else if (key == "game_effect_sd") {
                s.game_effect_sd = v.is_null() ? std::nullopt : std::optional(v.get<double>());
            } else {
                throw std::invalid_argument("scenario: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scenario: wrong value type: ") + e.what());
    }
    s.check();
    return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

SimScenario make_scenario(const ScenarioSpec& spec, const PriorConfig& prior) {
    spec.check();
    prior.check();
    const std::size_t p = spec.players;

    SimScenario scn;
    scn.first_year = spec.first_year;
    scn.innings_per_year = spec.innings_per_year;
    scn.away_prob = spec.away_prob;
    scn.censor_prob = spec.censor_prob;
    scn.seed = spec.seed;
    for (std::size_t i = 0; i < p; ++i) scn.player_ids.push_back(padded_id("P", i, p));
    for (std::size_t q = 0; q < spec.oppositions; ++q) {
        scn.opposition_labels.push_back(padded_id("Team", q, spec.oppositions));
    }

    const int last_year = spec.first_year + static_cast<int>(spec.years) - 1;
    Dims dims;
    dims.players = p;
    dims.years = spec.years;
    dims.decades = static_cast<std::size_t>(floor_decade(last_year) - floor_decade(spec.first_year) + 1);
    dims.oppositions = spec.oppositions;

    Rng rng = Rng::stream(spec.seed, {kSimTruth});
    ParamState t = ParamState::zeros(dims);
    t.mu_theta = spec.mu_theta.value_or(rng.normal(prior.m_mu, prior.s_mu));
    t.sigma2_theta = spec.sigma2_theta ? *spec.sigma2_theta : rng.inv_gamma(prior.a_sigma, prior.b_sigma);
    t.sigma2_delta = spec.sigma2_delta ? *spec.sigma2_delta : rng.inv_gamma(prior.a_delta, prior.b_delta);
    for (std::size_t i = 0; i < p; ++i) {
        t.theta[i] = rng.normal(t.mu_theta, std::sqrt(t.sigma2_theta));
        t.alpha1[i] = spec.alpha1 ? *spec.alpha1 : rng.normal(prior.alpha1_mean, std::sqrt(prior.alpha1_var));
        t.alpha2[i] = spec.alpha2 ? *spec.alpha2
                                  : std::exp(rng.normal(prior.alpha2_logmean, std::sqrt(prior.alpha2_logvar)));
        t.eta[i] = spec.eta ? *spec.eta : std::exp(rng.normal(prior.eta_logmean, std::sqrt(prior.eta_logvar)));
        t.pi[i] = spec.pi ? *spec.pi : rng.beta(prior.a_pi, prior.b_pi);
    }
    if (!t.delta.empty()) {
        const std::vector<double> zero(t.delta.size(), 0.0);
        t.delta = sample_mvn_tridiag(zero, build_q(t.delta.size()).scaled(1.0 / t.sigma2_delta), rng);
    }
    const double gsd = spec.game_effect_sd.value_or(prior.game_effect_sd);
    t.zeta2 = spec.zeta2 ? *spec.zeta2 : rng.normal(0.0, prior.game_effect_sd);
    if (spec.nu) {
        t.nu = *spec.nu;
    } else {
        for (auto& v : t.nu) v = rng.normal(0.0, prior.game_effect_sd);
    }
    for (auto& v : t.xi) v = rng.normal(0.0, gsd);
    for (auto& v : t.omega) v = rng.normal(0.0, gsd);
    scn.truth = std::move(t);

    Rng crng = Rng::stream(spec.seed, {kSimCareer});
    for (std::size_t i = 0; i < p; ++i) {
        const auto span = spec.max_career - spec.min_career + 1;
        const std::size_t len = spec.min_career + static_cast<std::size_t>(crng.uniform() * static_cast<double>(span));
        const std::size_t slots = spec.years - len + 1;
        scn.career_length.push_back(len);
        scn.career_start.push_back(static_cast<std::size_t>(crng.uniform() * static_cast<double>(slots)));
        scn.debut_age.push_back(spec.min_debut_age + crng.uniform() * (spec.max_debut_age - spec.min_debut_age));
    }
    scn.check();
    return scn;
}

}  // namespace batrank
