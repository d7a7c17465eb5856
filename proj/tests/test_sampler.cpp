#include <doctest.h>

#include <cmath>
#include <numeric>

#include "batrank/sampler.hpp"
#include "test_support.hpp"

using namespace batrank;

namespace {

ChainConfig short_config(std::uint64_t n_iter = 60, std::uint64_t burn_in = 20, std::uint64_t thin = 2) {
    ChainConfig cfg;
    cfg.n_iter = n_iter;
    cfg.burn_in = burn_in;
    cfg.thin = thin;
    cfg.seed = 42;
    return cfg;
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size() - 1);
    return m;
}

// One real player plus one without innings.
Dataset with_ghost() {
    BuildOptions opts;
    opts.extra_players = {"ghost"};
    std::vector<RawInnings> rows;
    for (int k = 0; k < 30; ++k) rows.push_back(batrank::testing::raw("a", 2000 + k % 5, 10 + 3 * k, k % 7 == 0));
    return build_dataset(rows, opts);
}

}  // namespace

TEST_CASE("chain config validation") {
    ChainConfig cfg = short_config();
    CHECK_NOTHROW(cfg.check());
    cfg.burn_in = cfg.n_iter;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = short_config();
    cfg.step_sizes["bogus"] = 1.0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = short_config();
    cfg.thin = 0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    CHECK(short_config(100, 10, 7).n_draws() == 12);
}

TEST_CASE("draw count and acceptance rates") {
    const auto sim = batrank::testing::small_sim();
    ChainConfig cfg = short_config(10, 0, 1);
    const ChainOutput out = run_chain(sim.dataset, PriorConfig{}, cfg);
    CHECK(out.draws.size() == 10);
    for (const auto& [name, rate] : out.acceptance_rates) {
        CHECK(rate >= 0.0);
        CHECK(rate <= 1.0);
    }
    CHECK(out.acceptance_rates.count("theta"));
    CHECK(out.acceptance_rates.count("delta"));
}

TEST_CASE("identical seeds give identical chains") {
    const auto sim = batrank::testing::small_sim();
    const ChainConfig cfg = short_config();
    const ChainOutput a = run_chain(sim.dataset, PriorConfig{}, cfg);
    const ChainOutput b = run_chain(sim.dataset, PriorConfig{}, cfg);
    REQUIRE(a.draws.size() == 20);
    CHECK(a.draws == b.draws);
    CHECK(a.acceptance_rates == b.acceptance_rates);

    ChainConfig other = cfg;
    other.seed = 43;
    CHECK(run_chain(sim.dataset, PriorConfig{}, other).draws != a.draws);
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
    const auto sim = batrank::testing::small_sim(5, 12, 14);
    ChainConfig cfg = short_config();
    cfg.adapt = true;
    cfg.exec = Exec::serial;
    const ChainOutput serial = run_chain(sim.dataset, PriorConfig{}, cfg);
    cfg.exec = Exec::parallel;
    const ChainOutput parallel = run_chain(sim.dataset, PriorConfig{}, cfg);
    CHECK(serial.draws == parallel.draws);
    CHECK(serial.config_hash == parallel.config_hash);
}

TEST_CASE("resume reproduces the uninterrupted chain") {
    const auto sim = batrank::testing::small_sim();
    ChainConfig cfg = short_config(80, 20, 3);
    cfg.adapt = true;
    cfg.checkpoint_every = 30;
    std::vector<Checkpoint> ckpts;
    RunHooks hooks;
    hooks.on_checkpoint = [&](const Checkpoint& c) { ckpts.push_back(c); };
    const ChainOutput full = run_chain(sim.dataset, PriorConfig{}, cfg, hooks);
    REQUIRE(ckpts.size() == 2);
    for (const auto& c : ckpts) {
        const ChainOutput rest = run_chain(sim.dataset, PriorConfig{}, cfg, {}, c);
        REQUIRE(c.draws_written + rest.draws.size() == full.draws.size());
        CHECK(std::equal(rest.draws.begin(), rest.draws.end(), full.draws.begin() + c.draws_written));
        CHECK(rest.acceptance_rates == full.acceptance_rates);
    }
    Checkpoint wrong = ckpts[0];
    wrong.seed = 7;
    CHECK_THROWS_AS(run_chain(sim.dataset, PriorConfig{}, cfg, {}, wrong), std::invalid_argument);
    ChainConfig changed = cfg;
    changed.thin = 4;
    CHECK_THROWS_AS(run_chain(sim.dataset, PriorConfig{}, changed, {}, ckpts[0]), std::invalid_argument);
}

TEST_CASE("config hash ignores seed and execution mode") {
    ChainConfig a = short_config();
    ChainConfig b = a;
    b.seed = 99;
    b.exec = Exec::serial;
    CHECK(config_hash(PriorConfig{}, a, 1) == config_hash(PriorConfig{}, b, 1));
    b.thin = 3;
    CHECK(config_hash(PriorConfig{}, a, 1) != config_hash(PriorConfig{}, b, 1));
    CHECK(config_hash(PriorConfig{}, a, 1) != config_hash(PriorConfig{}, a, 2));
    PriorConfig p;
    p.b_pi = 8.0;
    CHECK(config_hash(PriorConfig{}, a, 1) != config_hash(p, a, 1));
}

TEST_CASE("stored draws keep the structural pins") {
    const auto sim = batrank::testing::small_sim();
    const ChainOutput out = run_chain(sim.dataset, PriorConfig{}, short_config());
    const Dims d = sim.dataset.dims;
    for (const auto& s : out.draws) {
        CHECK(s.delta.size() == d.years - 1);
        CHECK(s.xi.size() == d.oppositions - 1);
        CHECK(s.omega.size() == (d.oppositions - 1) * (d.decades - 1));
        CHECK(s.nu.size() == 3);
        CHECK(s.sigma2_delta > 0.0);
        CHECK(s.sigma2_theta > 0.0);
        for (std::size_t i = 0; i < d.players; ++i) {
            CHECK(s.alpha2[i] > 0.0);
            CHECK(s.eta[i] > 0.0);
            CHECK(s.pi[i] > 0.0);
            CHECK(s.pi[i] < 1.0);
        }
    }
}

TEST_CASE("cached likelihood tracks the state") {
    const auto sim = batrank::testing::small_sim();
    Sampler smp(sim.dataset, PriorConfig{}, short_config());
    for (std::uint64_t it = 0; it < 15; ++it) {
        smp.iterate(it);
        CHECK(smp.log_likelihood() == doctest::Approx(total_log_lik(smp.state(), sim.dataset)).epsilon(1e-12));
    }
}

TEST_CASE("zero step sizes leave random-walk blocks unchanged") {
    const auto sim = batrank::testing::small_sim();
    ChainConfig cfg = short_config();
    for (const char* b : {"theta", "ageing", "game", "eta", "pi"}) cfg.step_sizes[b] = 0.0;
    Sampler smp(sim.dataset, PriorConfig{}, cfg);
    const ParamState before = smp.state();
    for (std::uint64_t it = 0; it < 5; ++it) {
        smp.update_theta(it);
        smp.update_ageing(it);
        smp.update_game_effects(it);
        smp.update_eta(it);
        smp.update_pi(it);
    }
    CHECK(smp.state() == before);
}

TEST_CASE("year-effect derivatives") {
    const auto sim = batrank::testing::small_sim(8, 6, 10);
    const Dataset& ds = sim.dataset;
    ParamState s = sim.truth;
    std::vector<double> at(s.delta.size());
    for (std::size_t l = 0; l < at.size(); ++l) at[l] = 0.05 * std::sin(static_cast<double>(l));

    const auto dh = delta_grad_hess(s, ds, at);
    const double h = 1e-5;
    for (std::size_t l = 0; l < at.size(); ++l) {
        auto up = at, dn = at;
        up[l] += h;
        dn[l] -= h;
        const double fd = (delta_objective(s, ds, up) - delta_objective(s, ds, dn)) / (2 * h);
        CHECK(dh.gradient[l] == doctest::Approx(fd).epsilon(1e-5));
        const auto gu = delta_grad_hess(s, ds, up).gradient;
        const auto gd = delta_grad_hess(s, ds, dn).gradient;
        CHECK(dh.hessian.diag[l] == doctest::Approx((gu[l] - gd[l]) / (2 * h)).epsilon(1e-5));
        if (l + 1 < at.size()) CHECK(dh.hessian.offdiag[l] == doctest::Approx((gu[l + 1] - gd[l + 1]) / (2 * h)).epsilon(1e-5));
        // data add curvature on top of the prior
        CHECK(dh.hessian.diag[l] >= build_q(at.size()).diag[l] / s.sigma2_delta);
    }
}

TEST_CASE("year-effect derivatives without data are the prior") {
    BuildOptions opts;
    opts.first_year = 2000;
    opts.last_year = 2005;
    opts.extra_players = {"x"};
    const Dataset ds = build_dataset({}, opts);
    ParamState s = ParamState::zeros(ds.dims);
    s.sigma2_delta = 0.04;
    const std::vector<double> at{0.1, -0.2, 0.3, 0.0, 0.05};
    const auto dh = delta_grad_hess(s, ds, at);
    const auto prec = build_q(5).scaled(1.0 / 0.04);
    const auto g = prec.multiply(at);
    for (std::size_t l = 0; l < 5; ++l) {
        CHECK(dh.gradient[l] == doctest::Approx(g[l]));
        CHECK(dh.hessian.diag[l] == doctest::Approx(prec.diag[l]));
    }
}

TEST_CASE("year block without data always accepts") {
    BuildOptions opts;
    opts.first_year = 1990;
    opts.last_year = 2009;
    opts.extra_players = {"x"};
    const Dataset ds = build_dataset({}, opts);
    ChainConfig cfg = short_config(200, 0, 1);
    cfg.blocks = block::delta | block::sigma2_delta;
    Sampler smp(ds, PriorConfig{}, cfg);
    int accepted = 0;
    for (std::uint64_t it = 0; it < 200; ++it) {
        const auto info = smp.update_delta_block(it);
        CHECK_FALSE(info.fallback);
        accepted += info.accepted;
        smp.gibbs_sigma2_delta(it);
    }
    CHECK(accepted == 200);
}

TEST_CASE("year block acceptance is high on near-Poisson data") {
    ScenarioSpec spec = default_scenario();
    spec.players = 20;
    spec.years = 15;
    spec.eta = 1e4;
    spec.pi = 1e-6;
    spec.censor_prob = 0.0;
    spec.seed = 4;
    const auto sim = simulate_dataset(make_scenario(spec));
    ChainConfig cfg = short_config(300, 0, 1);
    cfg.blocks = block::delta;
    Sampler smp(sim.dataset, PriorConfig{}, cfg, sim.truth);
    int accepted = 0;
    for (std::uint64_t it = 0; it < 300; ++it) accepted += smp.update_delta_block(it).accepted;
    CHECK(accepted > 150);
}

TEST_CASE("no-innings player recovers its priors") {
    const Dataset ds = with_ghost();
    const PriorConfig prior;
    ChainConfig cfg = short_config(40000, 0, 1);
    cfg.blocks = block::theta | block::ageing | block::eta | block::pi;
    Sampler smp(ds, prior, cfg);
    std::vector<double> theta, alpha1, log_alpha2, log_eta, pi;
    for (std::uint64_t it = 0; it < cfg.n_iter; ++it) {
        smp.iterate(it);
        if (it % 10) continue;
        const auto& s = smp.state();
        theta.push_back(s.theta[1]);
        alpha1.push_back(s.alpha1[1]);
        log_alpha2.push_back(std::log(s.alpha2[1]));
        log_eta.push_back(std::log(s.eta[1]));
        pi.push_back(s.pi[1]);
    }
    const double n_eff = static_cast<double>(theta.size()) / 3.0;  // conservative
    auto check = [&](const std::vector<double>& v, double mean, double var) {
        const Moments m = moments(v);
        CHECK(std::abs(m.mean - mean) < 4 * std::sqrt(var / n_eff));
        CHECK(m.var == doctest::Approx(var).epsilon(0.1));
    };
    const ParamState& s = smp.state();
    check(theta, s.mu_theta, s.sigma2_theta);
    check(alpha1, 30.0, 4.0);
    check(log_alpha2, -3.0, 9.0);
    check(log_eta, 0.0, 1.0);
    check(pi, 0.1, 0.9 / (100.0 * 11.0));
}

TEST_CASE("sigma2 delta Gibbs update at delta zero") {
    BuildOptions opts;
    opts.first_year = 1990;
    opts.last_year = 1999;
    opts.extra_players = {"x"};
    const Dataset ds = build_dataset({}, opts);
    ChainConfig cfg = short_config(20000, 0, 1);
    cfg.blocks = block::sigma2_delta;
    const PriorConfig prior;
    Sampler smp(ds, prior, cfg);
    std::vector<double> draws;
    for (std::uint64_t it = 0; it < cfg.n_iter; ++it) {
        smp.gibbs_sigma2_delta(it);
        draws.push_back(smp.state().sigma2_delta);
    }
    const double a = prior.a_delta + 4.5, b = prior.b_delta;
    const double mean = b / (a - 1), var = mean * mean / (a - 2);
    const Moments m = moments(draws);
    CHECK(std::abs(m.mean - mean) < 4 * std::sqrt(var / static_cast<double>(draws.size())));
}

TEST_CASE("sigma2 delta Gibbs agrees with a Metropolis update") {
    // Target IG(a + n/2, b + d'Qd/2) with d held fixed; compare the Gibbs
    // draws with a log-scale random-walk chain on the same density.
    BuildOptions opts;
    opts.first_year = 1990;
    opts.last_year = 2001;
    opts.extra_players = {"x"};
    const Dataset ds = build_dataset({}, opts);
    ChainConfig cfg = short_config(20000, 0, 1);
    cfg.blocks = block::sigma2_delta;
    const PriorConfig prior;
    ParamState init = initial_state(ds, prior);
    for (std::size_t l = 0; l < init.delta.size(); ++l) init.delta[l] = 0.1 * std::cos(static_cast<double>(l));
    Sampler smp(ds, prior, cfg, init);
    std::vector<double> gibbs;
    for (std::uint64_t it = 0; it < cfg.n_iter; ++it) {
        smp.gibbs_sigma2_delta(it);
        gibbs.push_back(smp.state().sigma2_delta);
    }
    const double a = prior.a_delta + 0.5 * static_cast<double>(init.delta.size());
    const double b = prior.b_delta + 0.5 * quad_form(build_q(init.delta.size()), init.delta);
    auto log_target = [&](double u) { return -a * u - b * std::exp(-u); };  // density of log s2
    Rng rng(77);
    double u = std::log(b / a);
    std::vector<double> mh;
    for (int it = 0; it < 200000; ++it) {
        const double prop = u + 0.8 * rng.normal();
        if (std::log(rng.uniform()) < log_target(prop) - log_target(u)) u = prop;
        if (it % 5 == 0) mh.push_back(std::exp(u));
    }
    const Moments g = moments(gibbs), m = moments(mh);
    CHECK(g.mean == doctest::Approx(b / (a - 1)).epsilon(0.02));
    CHECK(m.mean == doctest::Approx(g.mean).epsilon(0.03));
    CHECK(m.var == doctest::Approx(g.var).epsilon(0.12));
}

TEST_CASE("ability hyperparameters") {
    // every theta at m_mu puts the conditional mean of mu exactly at m_mu
    const auto sim = batrank::testing::small_sim();
    const PriorConfig prior;
    ChainConfig cfg = short_config(4000, 0, 1);
    cfg.blocks = block::hyper;
    ParamState init = initial_state(sim.dataset, prior);
    std::fill(init.theta.begin(), init.theta.end(), prior.m_mu);
    Sampler smp(sim.dataset, prior, cfg, init);
    std::vector<double> mu;
    for (std::uint64_t it = 0; it < cfg.n_iter; ++it) {
        smp.gibbs_hyper(it);
        mu.push_back(smp.state().mu_theta);
    }
    const Moments m = moments(mu);
    CHECK(std::abs(m.mean - prior.m_mu) < 0.02);
}

TEST_CASE("non-finite start is a numerical error") {
    const auto sim = batrank::testing::small_sim();
    ParamState bad = initial_state(sim.dataset, PriorConfig{});
    bad.theta[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(run_chain(sim.dataset, PriorConfig{}, short_config(), {}, std::nullopt, bad), NumericalError);
}
