#include "batrank/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "batrank/parallel.hpp"

namespace batrank {

namespace {

using NoPromote = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);  // std::lgamma writes the global signgam
#else
    return std::lgamma(x);
#endif
}

double softplus(double t) { return log1p_exp(t); }

void check_domain(double eta, double lambda) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be positive, got " + std::to_string(eta));
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DomainError("lambda must be positive, got " + std::to_string(lambda));
    }
}

double nb_lgamma_term(int x, double eta) {
    if (x <= 0) return 0.0;
    const double xd = static_cast<double>(x);
    return log_gamma(xd + eta) - log_gamma(eta) - log_gamma(xd + 1.0);
}

// NB log pmf written in terms of log lambda and log eta so that extreme
// rates neither overflow nor underflow.
double nb_log_pmf_lr(int x, double eta, double log_eta, double log_lambda, double lgamma_term) {
    const double t = log_lambda - log_eta;  // log beta
    const double sp = softplus(t);          // log(1 + beta)
    double out = -eta * sp;
    if (x > 0) out += lgamma_term + static_cast<double>(x) * (t - sp);
    return out;
}

double nb_log_pmf_lr(int x, double eta, double log_eta, double log_lambda) {
    return nb_log_pmf_lr(x, eta, log_eta, log_lambda, nb_lgamma_term(x, eta));
}

double nb_log_sf_lr(int x, double eta, double log_eta, double log_lambda) {
    if (x <= 0) return 0.0;
    // P(X >= x) = I_{1-p}(x, eta) with 1 - p = lambda / (lambda + eta).
    const double t = log_lambda - log_eta;
    const double one_minus_p = 1.0 / (1.0 + std::exp(-t));
    if (one_minus_p >= 1.0) return 0.0;

    // Short head: 1 - P(X < x) by the pmf recurrence, used only while the
    // head mass stays below 0.9 so the subtraction keeps full precision.
    if (x <= 200) {
        const double sp = softplus(t);
        double pmf = std::exp(-eta * sp);
        if (pmf > 1e-300) {
            const double ratio = std::exp(t - sp);
            double head = 0.0;
            for (int k = 0; k < x; ++k) {
                head += pmf;
                pmf *= (static_cast<double>(k) + eta) / static_cast<double>(k + 1) * ratio;
            }
            if (head <= 0.9) return std::log1p(-head);
        }
    }

    double sf = 0.0;
    if (one_minus_p > 0.0) {
        sf = boost::math::ibeta(static_cast<double>(x), eta, one_minus_p, NoPromote());
    }
    // ibeta loses relative accuracy as its result nears the underflow limit.
    if (sf > 1e-200) return std::log(sf);

    // Deep tail: sum pmf terms relative to pmf(x). Consecutive ratios are
    // (x + k + eta) / (x + k + 1) * (1 - p), which falls below 1 here.
    double log_head = nb_log_pmf_lr(x, eta, log_eta, log_lambda);
    if (log_head == kNegInf) return kNegInf;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 10'000'000; ++k) {
        term *= (static_cast<double>(x + k) + eta) / static_cast<double>(x + k + 1) * one_minus_p;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return log_head + std::log(sum);
}

}  // namespace

void PriorConfig::check() const {
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("prior ") + name + " must be positive");
        }
    };
    pos(s_mu, "s_mu");
    pos(a_sigma, "a_sigma");
    pos(b_sigma, "b_sigma");
    pos(a_delta, "a_delta");
    pos(b_delta, "b_delta");
    pos(game_effect_sd, "game_effect_sd");
    pos(alpha1_var, "alpha1_var");
    pos(alpha2_logvar, "alpha2_logvar");
    pos(eta_logvar, "eta_logvar");
    pos(a_pi, "a_pi");
    pos(b_pi, "b_pi");
    if (!std::isfinite(m_mu) || !std::isfinite(alpha1_mean) || !std::isfinite(alpha2_logmean) ||
        !std::isfinite(eta_logmean)) {
        throw std::invalid_argument("prior location entries must be finite");
    }
}

ParamState ParamState::zeros(const Dims& dims) {
    ParamState s;
    const std::size_t p = dims.players;
    s.theta.assign(p, 0.0);
    s.delta.assign(dims.years > 0 ? dims.years - 1 : 0, 0.0);
    s.alpha1.assign(p, 0.0);
    s.alpha2.assign(p, 1.0);
    s.xi.assign(dims.oppositions > 0 ? dims.oppositions - 1 : 0, 0.0);
    s.n_decades = std::max<std::size_t>(dims.decades, 1);
    s.omega.assign(s.xi.size() * (s.n_decades - 1), 0.0);
    s.eta.assign(p, 1.0);
    s.pi.assign(p, 0.1);
    return s;
}

Dims ParamState::dims() const {
    return Dims{theta.size(), delta.size() + 1, n_decades, xi.size() + 1};
}

std::size_t ParamState::omega_index(std::size_t q, std::size_t d) const {
    return (q - 1) * (n_decades - 1) + d;
}

double ParamState::interaction(std::size_t q, std::size_t d) const {
    if (q == 0 || d + 1 >= n_decades) return 0.0;
    return omega[omega_index(q, d)];
}

std::size_t ParamState::flat_size(const Dims& d) {
    const std::size_t p = d.players;
    const std::size_t y = d.years > 0 ? d.years - 1 : 0;
    const std::size_t o = d.oppositions > 0 ? d.oppositions - 1 : 0;
    const std::size_t dd = d.decades > 0 ? d.decades - 1 : 0;
    return 5 * p + y + o + o * dd + 3 + 1 + 1 + 2;
}

std::vector<double> ParamState::flatten() const {
    std::vector<double> out;
    out.reserve(flat_size(dims()));
    auto put = [&out](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
    put(theta);
    put(delta);
    out.push_back(sigma2_delta);
    put(alpha1);
    put(alpha2);
    out.push_back(zeta2);
    put(nu);
    put(xi);
    put(omega);
    put(eta);
    put(pi);
    out.push_back(mu_theta);
    out.push_back(sigma2_theta);
    return out;
}

ParamState ParamState::unflatten(std::span<const double> flat, const Dims& dims) {
    if (flat.size() != flat_size(dims)) throw std::invalid_argument("flat state has wrong length");
    ParamState s = zeros(dims);
    std::size_t k = 0;
    auto get = [&](std::vector<double>& v) {
        for (auto& x : v) x = flat[k++];
    };
    get(s.theta);
    get(s.delta);
    s.sigma2_delta = flat[k++];
    get(s.alpha1);
    get(s.alpha2);
    s.zeta2 = flat[k++];
    get(s.nu);
    get(s.xi);
    get(s.omega);
    get(s.eta);
    get(s.pi);
    s.mu_theta = flat[k++];
    s.sigma2_theta = flat[k++];
    return s;
}

double log1p_exp(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double ageing(double alpha1, double alpha2, double age) {
    const double d = age - alpha1;
    return -alpha2 * d * d;
}

double game_log_rate(const ParamState& s, const InningsRecord& rec) {
    return s.venue_effect(rec.venue) + s.innings_effect(rec.match_innings) +
           s.opposition_effect(rec.opposition) + s.interaction(rec.opposition, rec.decade);
}

double log_rate(const ParamState& s, const InningsRecord& rec) {
    return s.theta[rec.player] + s.year_effect(rec.year) +
           ageing(s.alpha1[rec.player], s.alpha2[rec.player], rec.age) + game_log_rate(s, rec);
}

double nb_log_pmf(int x, double eta, double lambda) {
    check_domain(eta, lambda);
    if (x < 0) return kNegInf;
    return nb_log_pmf_lr(x, eta, std::log(eta), std::log(lambda));
}

double nb_log_sf(int x, double eta, double lambda) {
    check_domain(eta, lambda);
    return nb_log_sf_lr(x, eta, std::log(eta), std::log(lambda));
}

double duck_prob(double pi, double eta, double lambda) {
    check_domain(eta, lambda);
    if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("pi must lie in [0, 1]");
    const double p0 = std::exp(-eta * std::log1p(lambda / eta));
    return pi + (1.0 - pi) * p0;
}

RecordConst record_const(const InningsRecord& rec, double eta) {
    RecordConst c;
    c.log_eta = std::log(eta);
    if (!rec.not_out && !rec.duck) c.lgamma_term = nb_lgamma_term(rec.runs, eta);
    return c;
}

double record_log_lik(const InningsRecord& rec, double log_lambda, double eta, double pi, const RecordConst& c) {
    if (rec.not_out) return std::log1p(-pi) + nb_log_sf_lr(rec.runs, eta, c.log_eta, log_lambda);
    if (rec.duck) {
        const double p0 = std::exp(-eta * softplus(log_lambda - c.log_eta));
        return std::log(pi + (1.0 - pi) * p0);
    }
    return std::log1p(-pi) + nb_log_pmf_lr(rec.runs, eta, c.log_eta, log_lambda, c.lgamma_term);
}

double record_log_lik(const InningsRecord& rec, double log_lambda, double eta, double pi) {
    return record_log_lik(rec, log_lambda, eta, pi, record_const(rec, eta));
}

double innings_log_lik(const ParamState& s, const InningsRecord& rec) {
    const double eta = s.eta[rec.player];
    const double pi = s.pi[rec.player];
    if (!(eta > 0.0)) throw DomainError("eta must be positive");
    if (!(pi > 0.0 && pi < 1.0) && pi != 0.0) throw DomainError("pi must lie in [0, 1)");
    return record_log_lik(rec, log_rate(s, rec), eta, pi);
}

double total_log_lik(const ParamState& s, const Dataset& ds) {
    double total = 0.0;
    for (const auto& rec : ds.records) total += innings_log_lik(s, rec);
    return total;
}

double total_log_lik_parallel(const ParamState& s, const Dataset& ds) {
    std::vector<double> terms(ds.records.size());
    parallel_for(Exec::parallel, ds.records.size(),
                 [&](std::size_t k) { terms[k] = innings_log_lik(s, ds.records[k]); });
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
}

}  // namespace batrank
