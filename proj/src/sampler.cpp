#include "batrank/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>

#include "batrank/rng.hpp"

namespace batrank {

namespace {

// Stream labels; never renumber, they fix every chain's random numbers.
enum : std::uint64_t {
    kStreamTheta = 1,
    kStreamDelta = 2,
    kStreamDeltaFallback = 3,
    kStreamSigma2Delta = 4,
    kStreamAgeing = 5,
    kStreamZeta = 6,
    kStreamNu = 7,
    kStreamXi = 8,
    kStreamOmega = 9,
    kStreamEta = 10,
    kStreamPi = 11,
    kStreamHyper = 12,
};

constexpr double kTargetAccept = 0.44;

double sq(double x) { return x * x; }

bool accept_mh(double log_ratio, double u) {
    return std::isfinite(log_ratio) ? std::log(u) < log_ratio : false;
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Base log rate (year effect removed) for every record.
std::vector<double> base_without_year(const ParamState& s, const Dataset& ds) {
    std::vector<double> base(ds.records.size());
    for (std::size_t k = 0; k < ds.records.size(); ++k) {
        const auto& r = ds.records[k];
        base[k] = log_rate(s, r) - s.year_effect(r.year);
    }
    return base;
}

// Data part of the simplified year-effect objective for one year:
// adds to grad and curvature, returns the objective contribution.
double year_data_terms(const Dataset& ds, const ParamState& s, std::span<const std::size_t> recs,
                       std::span<const double> base, double effect, double* grad, double* curv) {
    double obj = 0.0;
    double g = 0.0;
    double c = 0.0;
    for (std::size_t k : recs) {
        const auto& r = ds.records[k];
        if (r.not_out || r.duck) continue;
        const double eta = s.eta[r.player];
        const double lr = base[k] + effect;
        const double lambda = std::exp(lr);
        const double x = r.runs;
        obj -= x * lr - (eta + x) * log1p_exp(lr - std::log(eta));
        g -= eta * (x - lambda) / (eta + lambda);
        c += eta * lambda * (eta + x) / sq(eta + lambda);
    }
    if (grad) *grad += g;
    if (curv) *curv += c;
    return obj;
}

struct DeltaSystem {
    std::vector<double> gradient;
    TridiagPrecision hessian;
    double objective = 0.0;
};

DeltaSystem delta_system(const Dataset& ds, const RecordIndex& idx, const ParamState& s,
                         std::span<const double> base, std::span<const double> at, Exec exec) {
    const std::size_t n = at.size();
    const double prec = 1.0 / s.sigma2_delta;
    TridiagPrecision q = build_q(n);
    DeltaSystem out;
    out.gradient = q.multiply(at);
    for (auto& g : out.gradient) g *= prec;
    out.hessian = q.scaled(prec);
    std::vector<double> curv(n, 0.0);
    std::vector<double> obj(n, 0.0);
    parallel_for(exec, n, [&](std::size_t l) {
        obj[l] = year_data_terms(ds, s, idx.by_year[l], base, at[l], &out.gradient[l], &curv[l]);
    });
    out.hessian.add_diagonal(curv);
    out.objective = quad_form(q, at) / (2.0 * s.sigma2_delta);
    for (double v : obj) out.objective += v;
    return out;
}

// consts may be empty, in which case the rate-free terms are computed fresh.
double delta_log_fcd_impl(const Dataset& ds, const RecordIndex& idx, const ParamState& s,
                          std::span<const double> base, std::span<const double> at,
                          std::span<const RecordConst> consts, Exec exec) {
    const std::size_t n = at.size();
    std::vector<double> per_year(n, 0.0);
    parallel_for(exec, n, [&](std::size_t l) {
        double acc = 0.0;
        for (std::size_t k : idx.by_year[l]) {
            const auto& r = ds.records[k];
            const double eta = s.eta[r.player];
            const RecordConst c = consts.empty() ? record_const(r, eta) : consts[k];
            acc += record_log_lik(r, base[k] + at[l], eta, s.pi[r.player], c);
        }
        per_year[l] = acc;
    });
    double total = -quad_form(build_q(n), at) / (2.0 * s.sigma2_delta);
    for (double v : per_year) total += v;
    return total;
}

}  // namespace

const char* stat_name(Stat s) {
    switch (s) {
        case Stat::theta: return "theta";
        case Stat::delta: return "delta";
        case Stat::delta_fallback: return "delta_fallback";
        case Stat::ageing: return "ageing";
        case Stat::zeta2: return "zeta2";
        case Stat::nu: return "nu";
        case Stat::xi: return "xi";
        case Stat::omega: return "omega";
        case Stat::eta: return "eta";
        case Stat::pi: return "pi";
        case Stat::count: break;
    }
    return "?";
}

void ChainConfig::check() const {
    if (n_iter == 0) throw std::invalid_argument("n_iter must be positive");
    if (burn_in >= n_iter) throw std::invalid_argument("burn_in must be smaller than n_iter");
    if (thin == 0) throw std::invalid_argument("thin must be positive");
    if (newton_max_iter <= 0) throw std::invalid_argument("newton_max_iter must be positive");
    if (!(newton_tol > 0.0)) throw std::invalid_argument("newton_tol must be positive");
    for (const auto& [name, v] : step_sizes) {
        static const char* known[] = {"theta", "ageing", "game", "eta", "pi", "delta"};
        if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return name == k; })) {
            throw std::invalid_argument("unknown step-size block '" + name + "'");
        }
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("step size for " + name + " must be >= 0");
    }
}

double ChainConfig::step_scale(const std::string& name) const {
    if (auto it = step_sizes.find(name); it != step_sizes.end()) return it->second;
    // 2.4 sd is the usual optimum for a scalar Gaussian target; the ageing
    // pair moves two coordinates at once.
    return name == "ageing" ? 1.7 : 2.4;
}

ParamState initial_state(const Dataset& ds, const PriorConfig& prior) {
    ParamState s = ParamState::zeros(ds.dims);
    std::vector<double> sum(ds.dims.players, 0.0);
    std::vector<double> n(ds.dims.players, 0.0);
    for (const auto& r : ds.records) {
        if (r.not_out) continue;
        sum[r.player] += r.runs;
        n[r.player] += 1.0;
    }
    for (std::size_t i = 0; i < ds.dims.players; ++i) {
        s.theta[i] = n[i] > 0 ? std::log(std::max(sum[i] / n[i], 1.0)) : prior.m_mu;
        s.alpha1[i] = prior.alpha1_mean;
        s.alpha2[i] = std::exp(prior.alpha2_logmean);
        s.eta[i] = std::exp(prior.eta_logmean);
        s.pi[i] = prior.a_pi / (prior.a_pi + prior.b_pi);
    }
    s.mu_theta = prior.m_mu;
    s.sigma2_theta = prior.a_sigma > 1.0 ? prior.b_sigma / (prior.a_sigma - 1.0) : prior.b_sigma;
    s.sigma2_delta = prior.a_delta > 1.0 ? prior.b_delta / (prior.a_delta - 1.0) : prior.b_delta;
    return s;
}

StepSizes default_steps(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg) {
    // Rough posterior sd from prior precision plus a per-innings information
    // guess, times the block multiplier.
    const RecordIndex idx(ds);
    const std::size_t p = ds.dims.players;
    const double s2_theta = prior.a_sigma > 1.0 ? prior.b_sigma / (prior.a_sigma - 1.0) : prior.b_sigma;
    const double s2_delta = prior.a_delta > 1.0 ? prior.b_delta / (prior.a_delta - 1.0) : prior.b_delta;
    const double game_prec = 1.0 / sq(prior.game_effect_sd);
    auto sd = [](double prec) { return 1.0 / std::sqrt(prec); };

    StepSizes st;
    st.theta.resize(p);
    st.alpha1.resize(p);
    st.log_alpha2.resize(p);
    st.log_eta.resize(p);
    st.logit_pi.resize(p);
    for (std::size_t i = 0; i < p; ++i) {
        const double n = static_cast<double>(ds.per_player_counts[i]);
        st.theta[i] = cfg.step_scale("theta") * sd(1.0 / s2_theta + n);
        st.alpha1[i] = cfg.step_scale("ageing") * sd(1.0 / prior.alpha1_var + 0.05 * n);
        st.log_alpha2[i] = cfg.step_scale("ageing") * sd(1.0 / prior.alpha2_logvar + 0.05 * n);
        st.log_eta[i] = cfg.step_scale("eta") * sd(1.0 / prior.eta_logvar + 0.2 * n);
        st.logit_pi[i] = cfg.step_scale("pi") * sd(0.5 + 0.1 * n);
    }
    const double g = cfg.step_scale("game");
    st.zeta2 = g * sd(game_prec + static_cast<double>(idx.away.size()));
    st.nu.resize(3);
    for (std::size_t m = 0; m < 3; ++m) {
        st.nu[m] = g * sd(game_prec + static_cast<double>(idx.by_innings[m + 1].size()));
    }
    const std::size_t o = ds.dims.oppositions > 0 ? ds.dims.oppositions - 1 : 0;
    const std::size_t dd = ds.dims.decades > 0 ? ds.dims.decades - 1 : 0;
    st.xi.resize(o);
    st.omega.resize(o * dd);
    for (std::size_t q = 1; q <= o; ++q) {
        st.xi[q - 1] = g * sd(game_prec + static_cast<double>(idx.by_opposition[q].size()));
        for (std::size_t d = 0; d < dd; ++d) {
            const auto cnt = idx.by_opp_decade[q * ds.dims.decades + d].size();
            st.omega[(q - 1) * dd + d] = g * sd(game_prec + static_cast<double>(cnt));
        }
    }
    const std::size_t ny = ds.dims.years > 0 ? ds.dims.years - 1 : 0;
    st.delta.resize(ny);
    for (std::size_t l = 0; l < ny; ++l) {
        st.delta[l] = cfg.step_scale("delta") * sd(2.0 / s2_delta + static_cast<double>(idx.by_year[l].size()));
    }
    return st;
}

DeltaDerivatives delta_grad_hess(const ParamState& s, const Dataset& ds, std::span<const double> at) {
    if (at.size() != s.delta.size()) throw std::invalid_argument("delta_grad_hess: wrong length");
    const RecordIndex idx(ds);
    const auto base = base_without_year(s, ds);
    auto sys = delta_system(ds, idx, s, base, at, Exec::serial);
    return {std::move(sys.gradient), std::move(sys.hessian)};
}

double delta_objective(const ParamState& s, const Dataset& ds, std::span<const double> at) {
    if (at.size() != s.delta.size()) throw std::invalid_argument("delta_objective: wrong length");
    const RecordIndex idx(ds);
    const auto base = base_without_year(s, ds);
    return delta_system(ds, idx, s, base, at, Exec::serial).objective;
}

double delta_log_fcd(const ParamState& s, const Dataset& ds, std::span<const double> at) {
    if (at.size() != s.delta.size()) throw std::invalid_argument("delta_log_fcd: wrong length");
    const RecordIndex idx(ds);
    const auto base = base_without_year(s, ds);
    return delta_log_fcd_impl(ds, idx, s, base, at, {}, Exec::serial);
}

// ---------------------------------------------------------------------------

Sampler::Sampler(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg)
    : Sampler(ds, prior, cfg, initial_state(ds, prior)) {}

Sampler::Sampler(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg, ParamState init)
    : ds_(ds), prior_(prior), cfg_(cfg), index_(ds), state_(std::move(init)) {
    prior_.check();
    cfg_.check();
    if (!(state_.dims() == ds.dims)) {
        // dims() reports D from n_decades and Y from delta; compare field-wise.
        const Dims a = state_.dims();
        if (a.players != ds.dims.players || a.years != std::max<std::size_t>(ds.dims.years, 1) ||
            a.oppositions != std::max<std::size_t>(ds.dims.oppositions, 1) ||
            a.decades != std::max<std::size_t>(ds.dims.decades, 1)) {
            throw std::invalid_argument("initial state does not match dataset dimensions");
        }
    }
    steps_ = default_steps(ds, prior, cfg);
    refresh_cache();
}

Sampler::Sampler(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg, const Checkpoint& ckpt)
    : Sampler(ds, prior, cfg, ckpt.state) {
    steps_ = ckpt.steps;
    counts_ = ckpt.counts;
    delta_fallbacks_ = ckpt.delta_fallbacks;
}

void Sampler::set_state(ParamState s) {
    state_ = std::move(s);
    refresh_cache();
}

void Sampler::refresh_cache() {
    const std::size_t n = ds_.records.size();
    log_rate_.resize(n);
    log_lik_.resize(n);
    lconst_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& r = ds_.records[k];
        log_rate_[k] = log_rate(state_, r);
        lconst_[k] = record_const(r, state_.eta[r.player]);
        log_lik_[k] = record_log_lik(r, log_rate_[k], state_.eta[r.player], state_.pi[r.player], lconst_[k]);
    }
}

void Sampler::refresh_records(std::span<const std::size_t> records) {
    for (std::size_t k : records) {
        const auto& r = ds_.records[k];
        log_rate_[k] = log_rate(state_, r);
        lconst_[k] = record_const(r, state_.eta[r.player]);
        log_lik_[k] = record_log_lik(r, log_rate_[k], state_.eta[r.player], state_.pi[r.player], lconst_[k]);
    }
}

double Sampler::log_likelihood() const {
    double total = 0.0;
    for (double v : log_lik_) total += v;
    return total;
}

bool Sampler::counting(std::uint64_t iter) const { return iter >= cfg_.burn_in; }

void Sampler::adapt_step(double& step, bool accepted, std::uint64_t iter) const {
    if (!cfg_.adapt || iter >= cfg_.burn_in) return;
    const double gain = std::pow(static_cast<double>(iter) + 1.0, -0.6);
    step *= std::exp(gain * ((accepted ? 1.0 : 0.0) - kTargetAccept));
    step = std::clamp(step, 1e-6, 1e3);
}

void Sampler::tally(Stat s, std::span<const std::uint8_t> accepted, std::uint64_t iter) {
    if (!counting(iter)) return;
    auto& c = counts_[static_cast<std::size_t>(s)];
    c.proposed += accepted.size();
    for (auto a : accepted) c.accepted += a;
}

void Sampler::update_theta(std::uint64_t iter) {
    const std::size_t p = ds_.dims.players;
    std::vector<std::uint8_t> acc(p, 0);
    const double mu = state_.mu_theta;
    const double s2 = state_.sigma2_theta;
    parallel_for(cfg_.exec, p, [&](std::size_t i) {
        Rng rng = Rng::stream(cfg_.seed, {iter, kStreamTheta, i});
        const double cur = state_.theta[i];
        const double prop = cur + steps_.theta[i] * rng.normal();
        const double u = rng.uniform();
        const double d = prop - cur;
        const double eta = state_.eta[i];
        const double pi = state_.pi[i];
        double log_ratio = (sq(cur - mu) - sq(prop - mu)) / (2.0 * s2);
        const auto& recs = index_.by_player[i];
        for (std::size_t k : recs) {
            log_ratio += record_log_lik(ds_.records[k], log_rate_[k] + d, eta, pi, lconst_[k]) - log_lik_[k];
        }
        const bool ok = accept_mh(log_ratio, u);
        if (ok) {
            state_.theta[i] = prop;
            refresh_records(recs);
        }
        acc[i] = ok;
        adapt_step(steps_.theta[i], ok, iter);
    });
    tally(Stat::theta, acc, iter);
}

DeltaUpdateInfo Sampler::update_delta_block(std::uint64_t iter) {
    DeltaUpdateInfo info;
    const std::size_t n = state_.delta.size();
    if (n == 0) return info;

    std::vector<double> base(ds_.records.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
        base[k] = log_rate_[k] - state_.year_effect(ds_.records[k].year);
    }

    // Damped Newton on the simplified objective, from the current value. Each
    // trial point's pass also yields the next gradient and Hessian.
    std::vector<double> x = state_.delta;
    std::optional<BidiagFactor> factor;
    DeltaSystem sys = delta_system(ds_, index_, state_, base, x, cfg_.exec);
    try {
        for (int it = 0;; ++it) {
            BidiagFactor f = chol(sys.hessian);
            const auto step = solve(f, sys.gradient);
            double max_step = 0.0;
            for (double v : step) max_step = std::max(max_step, std::abs(v));
            if (!std::isfinite(max_step)) break;
            if (max_step < cfg_.newton_tol) {
                factor = std::move(f);
                break;
            }
            if (it == cfg_.newton_max_iter) break;
            double t = 1.0;
            std::vector<double> next(n);
            DeltaSystem trial;
            for (int half = 0; half < 60; ++half) {
                for (std::size_t l = 0; l < n; ++l) next[l] = x[l] - t * step[l];
                trial = delta_system(ds_, index_, state_, base, next, cfg_.exec);
                if (std::isfinite(trial.objective) && trial.objective <= sys.objective + 1e-12 * std::abs(sys.objective)) {
                    break;
                }
                t *= 0.5;
            }
            x = std::move(next);
            sys = std::move(trial);
            info.newton_iterations = it + 1;
        }
    } catch (const NotPositiveDefinite&) {
        factor.reset();
    }

    if (!factor) {
        info.fallback = true;
        ++delta_fallbacks_;
        std::fprintf(stderr, "batrank: year-effect Newton step failed at iteration %llu; using random-walk sweep\n",
                     static_cast<unsigned long long>(iter));
        delta_fallback_sweep(iter);
        return info;
    }

    Rng rng = Rng::stream(cfg_.seed, {iter, kStreamDelta, 0});
    const std::vector<double>& mode = x;
    const TridiagPrecision& hess = sys.hessian;
    const auto proposal = sample_mvn(mode, *factor, rng);
    const double u = rng.uniform();

    auto log_q = [&](const std::vector<double>& v) {
        std::vector<double> d(n);
        for (std::size_t l = 0; l < n; ++l) d[l] = v[l] - mode[l];
        return -0.5 * quad_form(hess, d);
    };
    // Current full conditional from the cached per-record terms.
    double current = -quad_form(build_q(n), state_.delta) / (2.0 * state_.sigma2_delta);
    for (std::size_t l = 0; l < n; ++l) {
        double acc = 0.0;
        for (std::size_t k : index_.by_year[l]) acc += log_lik_[k];
        current += acc;
    }
    const double log_ratio = delta_log_fcd_impl(ds_, index_, state_, base, proposal, lconst_, cfg_.exec) - current +
                             log_q(state_.delta) - log_q(proposal);
    info.log_accept_ratio = log_ratio;
    info.accepted = accept_mh(log_ratio, u);
    info.mode = mode;
    if (info.accepted) {
        state_.delta = proposal;
        parallel_for(cfg_.exec, n, [&](std::size_t l) { refresh_records(index_.by_year[l]); });
    }
    const std::uint8_t a = info.accepted;
    tally(Stat::delta, std::span<const std::uint8_t>(&a, 1), iter);
    return info;
}

bool Sampler::delta_fallback_sweep(std::uint64_t iter) {
    const std::size_t n = state_.delta.size();
    const TridiagPrecision q = build_q(n);
    const double prec = 1.0 / state_.sigma2_delta;
    std::vector<std::uint8_t> acc(n, 0);
    for (std::size_t l = 0; l < n; ++l) {
        Rng rng = Rng::stream(cfg_.seed, {iter, kStreamDeltaFallback, l});
        const double cur = state_.delta[l];
        const double prop = cur + steps_.delta[l] * rng.normal();
        const double u = rng.uniform();
        double neighbours = 0.0;
        if (l > 0) neighbours += q.offdiag[l - 1] * state_.delta[l - 1];
        if (l + 1 < n) neighbours += q.offdiag[l] * state_.delta[l + 1];
        double log_ratio = -prec * (0.5 * q.diag[l] * (sq(prop) - sq(cur)) + (prop - cur) * neighbours);
        const double d = prop - cur;
        for (std::size_t k : index_.by_year[l]) {
            const auto& r = ds_.records[k];
            log_ratio += record_log_lik(r, log_rate_[k] + d, state_.eta[r.player], state_.pi[r.player], lconst_[k]) -
                         log_lik_[k];
        }
        const bool ok = accept_mh(log_ratio, u);
        if (ok) {
            state_.delta[l] = prop;
            refresh_records(index_.by_year[l]);
        }
        acc[l] = ok;
        adapt_step(steps_.delta[l], ok, iter);
    }
    tally(Stat::delta_fallback, acc, iter);
    return true;
}

void Sampler::gibbs_sigma2_delta(std::uint64_t iter) {
    const std::size_t n = state_.delta.size();
    Rng rng = Rng::stream(cfg_.seed, {iter, kStreamSigma2Delta, 0});
    const double quad = n > 0 ? quad_form(build_q(n), state_.delta) : 0.0;
    state_.sigma2_delta = rng.inv_gamma(prior_.a_delta + 0.5 * static_cast<double>(n), prior_.b_delta + 0.5 * quad);
}

void Sampler::update_ageing(std::uint64_t iter) {
    const std::size_t p = ds_.dims.players;
    std::vector<std::uint8_t> acc(p, 0);
    parallel_for(cfg_.exec, p, [&](std::size_t i) {
        Rng rng = Rng::stream(cfg_.seed, {iter, kStreamAgeing, i});
        const double a1 = state_.alpha1[i];
        const double u2 = std::log(state_.alpha2[i]);
        const double a1p = a1 + steps_.alpha1[i] * rng.normal();
        const double u2p = u2 + steps_.log_alpha2[i] * rng.normal();
        const double u = rng.uniform();
        const double a2 = state_.alpha2[i];
        const double a2p = u2p == u2 ? a2 : std::exp(u2p);  // exp(log x) may differ from x
        // Prior on (alpha1, log alpha2); the log-scale walk contributes the
        // alpha2*/alpha2 Jacobian, which cancels the lognormal 1/alpha2.
        double log_ratio = (sq(a1 - prior_.alpha1_mean) - sq(a1p - prior_.alpha1_mean)) / (2.0 * prior_.alpha1_var) +
                           (sq(u2 - prior_.alpha2_logmean) - sq(u2p - prior_.alpha2_logmean)) /
                               (2.0 * prior_.alpha2_logvar);
        const double eta = state_.eta[i];
        const double pi = state_.pi[i];
        const auto& recs = index_.by_player[i];
        for (std::size_t k : recs) {
            const auto& r = ds_.records[k];
            const double lr = log_rate_[k] - ageing(a1, a2, r.age) + ageing(a1p, a2p, r.age);
            log_ratio += record_log_lik(r, lr, eta, pi, lconst_[k]) - log_lik_[k];
        }
        const bool ok = accept_mh(log_ratio, u) && a2p > 0.0;
        if (ok) {
            state_.alpha1[i] = a1p;
            state_.alpha2[i] = a2p;
            refresh_records(recs);
        }
        acc[i] = ok;
        adapt_step(steps_.alpha1[i], ok, iter);
        adapt_step(steps_.log_alpha2[i], ok, iter);
    });
    tally(Stat::ageing, acc, iter);
}

bool Sampler::rw_additive(double& value, double& step, double prior_sd, std::span<const std::size_t> records,
                          Rng& rng, std::uint64_t iter) {
    const double cur = value;
    const double prop = cur + step * rng.normal();
    const double u = rng.uniform();
    const double d = prop - cur;
    double log_ratio = (sq(cur) - sq(prop)) / (2.0 * sq(prior_sd));
    for (std::size_t k : records) {
        const auto& r = ds_.records[k];
        log_ratio += record_log_lik(r, log_rate_[k] + d, state_.eta[r.player], state_.pi[r.player], lconst_[k]) -
                         log_lik_[k];
    }
    const bool ok = accept_mh(log_ratio, u);
    if (ok) {
        value = prop;
        refresh_records(records);
    }
    adapt_step(step, ok, iter);
    return ok;
}

void Sampler::update_game_effects(std::uint64_t iter) {
    const double sd = prior_.game_effect_sd;
    {
        Rng rng = Rng::stream(cfg_.seed, {iter, kStreamZeta, 0});
        const std::uint8_t a = rw_additive(state_.zeta2, steps_.zeta2, sd, index_.away, rng, iter);
        tally(Stat::zeta2, std::span<const std::uint8_t>(&a, 1), iter);
    }
    {
        std::vector<std::uint8_t> acc(3, 0);
        parallel_for(cfg_.exec, 3, [&](std::size_t m) {
            Rng rng = Rng::stream(cfg_.seed, {iter, kStreamNu, m});
            acc[m] = rw_additive(state_.nu[m], steps_.nu[m], sd, index_.by_innings[m + 1], rng, iter);
        });
        tally(Stat::nu, acc, iter);
    }
    const std::size_t o = state_.xi.size();
    {
        std::vector<std::uint8_t> acc(o, 0);
        parallel_for(cfg_.exec, o, [&](std::size_t j) {
            Rng rng = Rng::stream(cfg_.seed, {iter, kStreamXi, j});
            acc[j] = rw_additive(state_.xi[j], steps_.xi[j], sd, index_.by_opposition[j + 1], rng, iter);
        });
        tally(Stat::xi, acc, iter);
    }
    {
        const std::size_t dd = state_.n_decades - 1;
        const std::size_t n = state_.omega.size();
        std::vector<std::uint8_t> acc(n, 0);
        parallel_for(cfg_.exec, n, [&](std::size_t j) {
            const std::size_t q = j / dd + 1;
            const std::size_t d = j % dd;
            Rng rng = Rng::stream(cfg_.seed, {iter, kStreamOmega, j});
            acc[j] = rw_additive(state_.omega[j], steps_.omega[j], sd, index_.by_opp_decade[q * ds_.dims.decades + d],
                                 rng, iter);
        });
        tally(Stat::omega, acc, iter);
    }
}

void Sampler::update_eta(std::uint64_t iter) {
    const std::size_t p = ds_.dims.players;
    std::vector<std::uint8_t> acc(p, 0);
    parallel_for(cfg_.exec, p, [&](std::size_t i) {
        Rng rng = Rng::stream(cfg_.seed, {iter, kStreamEta, i});
        const double cur = std::log(state_.eta[i]);
        const double prop = cur + steps_.log_eta[i] * rng.normal();
        const double u = rng.uniform();
        const double eta_p = prop == cur ? state_.eta[i] : std::exp(prop);
        // Density of log eta is normal; no further Jacobian.
        double log_ratio = (sq(cur - prior_.eta_logmean) - sq(prop - prior_.eta_logmean)) / (2.0 * prior_.eta_logvar);
        const auto& recs = index_.by_player[i];
        const double pi = state_.pi[i];
        for (std::size_t k : recs) {
            log_ratio += record_log_lik(ds_.records[k], log_rate_[k], eta_p, pi) - log_lik_[k];
        }
        const bool ok = eta_p > 0.0 && std::isfinite(eta_p) && accept_mh(log_ratio, u);
        if (ok) {
            state_.eta[i] = eta_p;
            refresh_records(recs);
        }
        acc[i] = ok;
        adapt_step(steps_.log_eta[i], ok, iter);
    });
    tally(Stat::eta, acc, iter);
}

void Sampler::update_pi(std::uint64_t iter) {
    const std::size_t p = ds_.dims.players;
    std::vector<std::uint8_t> acc(p, 0);
    parallel_for(cfg_.exec, p, [&](std::size_t i) {
        Rng rng = Rng::stream(cfg_.seed, {iter, kStreamPi, i});
        const double pc = state_.pi[i];
        const double cur = std::log(pc) - std::log1p(-pc);
        const double prop = cur + steps_.logit_pi[i] * rng.normal();
        const double u = rng.uniform();
        const double pp = prop == cur ? pc : logistic(prop);
        // Beta prior times the logit Jacobian pi (1 - pi).
        auto log_target = [&](double v) { return prior_.a_pi * std::log(v) + prior_.b_pi * std::log1p(-v); };
        double log_ratio = log_target(pp) - log_target(pc);
        const auto& recs = index_.by_player[i];
        const double eta = state_.eta[i];
        for (std::size_t k : recs) {
            log_ratio += record_log_lik(ds_.records[k], log_rate_[k], eta, pp, lconst_[k]) - log_lik_[k];
        }
        const bool ok = pp > 0.0 && pp < 1.0 && accept_mh(log_ratio, u);
        if (ok) {
            state_.pi[i] = pp;
            refresh_records(recs);
        }
        acc[i] = ok;
        adapt_step(steps_.logit_pi[i], ok, iter);
    });
    tally(Stat::pi, acc, iter);
}

void Sampler::gibbs_hyper(std::uint64_t iter) {
    Rng rng = Rng::stream(cfg_.seed, {iter, kStreamHyper, 0});
    const double p = static_cast<double>(state_.theta.size());
    const double s2 = state_.sigma2_theta;
    const double s2mu = sq(prior_.s_mu);
    const double sum = std::accumulate(state_.theta.begin(), state_.theta.end(), 0.0);
    const double denom = s2 + p * s2mu;
    const double mean = (prior_.m_mu * s2 + sum * s2mu) / denom;
    const double var = s2mu * s2 / denom;
    state_.mu_theta = rng.normal(mean, std::sqrt(var));
    double ss = 0.0;
    for (double t : state_.theta) ss += sq(t - state_.mu_theta);
    state_.sigma2_theta = rng.inv_gamma(prior_.a_sigma + 0.5 * p, prior_.b_sigma + 0.5 * ss);
}

void Sampler::iterate(std::uint64_t iter) {
    const unsigned b = cfg_.blocks;
    if (b & block::theta) update_theta(iter);
    if (b & block::delta) update_delta_block(iter);
    if (b & block::sigma2_delta) gibbs_sigma2_delta(iter);
    if (b & block::ageing) update_ageing(iter);
    if (b & block::game) update_game_effects(iter);
    if (b & block::eta) update_eta(iter);
    if (b & block::pi) update_pi(iter);
    if (b & block::hyper) gibbs_hyper(iter);
}

Checkpoint Sampler::checkpoint(std::uint64_t next_iter) const {
    Checkpoint c;
    c.next_iter = next_iter;
    c.state = state_;
    c.steps = steps_;
    c.counts = counts_;
    c.delta_fallbacks = delta_fallbacks_;
    c.seed = cfg_.seed;
    return c;
}

// ---------------------------------------------------------------------------

std::uint64_t config_hash(const PriorConfig& prior, const ChainConfig& cfg, std::uint64_t data_fingerprint) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    char buf[64];
    for (double v : {prior.m_mu, prior.s_mu, prior.a_sigma, prior.b_sigma, prior.a_delta, prior.b_delta,
                     prior.game_effect_sd, prior.alpha1_mean, prior.alpha1_var, prior.alpha2_logmean,
                     prior.alpha2_logvar, prior.eta_logmean, prior.eta_logvar, prior.a_pi, prior.b_pi}) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        mix(buf);
    }
    mix(std::to_string(cfg.n_iter));
    mix(std::to_string(cfg.burn_in));
    mix(std::to_string(cfg.thin));
    for (const auto& [k, v] : cfg.step_sizes) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        mix(k + "=" + buf);
    }
    mix(cfg.adapt ? "adapt" : "fixed");
    mix(std::to_string(cfg.newton_max_iter));
    std::snprintf(buf, sizeof buf, "%.17g", cfg.newton_tol);
    mix(buf);
    mix(std::to_string(cfg.blocks));
    mix(std::to_string(data_fingerprint));
    return h;
}

ChainOutput run_chain(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg, const RunHooks& hooks,
                      const std::optional<Checkpoint>& resume, const std::optional<ParamState>& init) {
    cfg.check();
    prior.check();

    ChainOutput out;
    out.config = cfg;
    out.prior = prior;
    out.dataset_fingerprint = fingerprint(ds);
    out.config_hash = config_hash(prior, cfg, out.dataset_fingerprint);
    out.dims = ds.dims;
    out.player_ids = ds.player_ids;
    out.opposition_labels = ds.opposition_labels;
    out.first_year = ds.first_year;
    out.decade_start = ds.decade_start;

    if (resume && resume->config_hash != 0 && resume->config_hash != out.config_hash) {
        throw std::invalid_argument("checkpoint was written for a different configuration or dataset");
    }
    if (resume && resume->seed != cfg.seed) {
        throw std::invalid_argument("checkpoint was written with seed " + std::to_string(resume->seed));
    }

    std::optional<Sampler> smp;
    if (resume) {
        smp.emplace(ds, prior, cfg, *resume);
    } else if (init) {
        smp.emplace(ds, prior, cfg, *init);
    } else {
        smp.emplace(ds, prior, cfg);
    }
    if (!std::isfinite(smp->log_likelihood())) {
        throw NumericalError("log-likelihood is not finite at the initial state");
    }

    std::uint64_t start = resume ? resume->next_iter : 0;
    std::uint64_t written = resume ? resume->draws_written : 0;
    if (!hooks.on_draw) out.draws.reserve(cfg.n_draws() - std::min(written, cfg.n_draws()));

    for (std::uint64_t it = start; it < cfg.n_iter; ++it) {
        smp->iterate(it);
        if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0) {
            if (hooks.on_draw) {
                hooks.on_draw(smp->state());
            } else {
                out.draws.push_back(smp->state());
            }
            ++written;
        }
        if (cfg.checkpoint_every > 0 && hooks.on_checkpoint && (it + 1) % cfg.checkpoint_every == 0 &&
            it + 1 < cfg.n_iter) {
            Checkpoint c = smp->checkpoint(it + 1);
            c.draws_written = written;
            c.config_hash = out.config_hash;
            hooks.on_checkpoint(c);
            if (hooks.stop && hooks.stop(it + 1)) {
                out.interrupted = true;
                break;
            }
        }
    }

    for (std::size_t s = 0; s < static_cast<std::size_t>(Stat::count); ++s) {
        const auto& c = smp->counts()[s];
        if (c.proposed > 0) out.acceptance_rates[stat_name(static_cast<Stat>(s))] = c.rate();
    }
    out.delta_fallbacks = smp->delta_fallbacks();
    return out;
}

}  // namespace batrank
