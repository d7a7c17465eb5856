#pragma once

// Zero-inflated, right-censored negative binomial model for runs per innings.
//
// Log rate for an innings of player i:
//   log lambda = theta_i + delta_year + f_i(age) + zeta_venue + nu_innings
//              + xi_opposition + omega_{opposition, decade}
// with f_i(a) = -alpha2_i (a - alpha1_i)^2. Runs are NB with mean lambda and
// variance lambda (1 + lambda / eta_i); completed ducks are inflated by pi_i.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "batrank/ingest.hpp"

namespace batrank {

// Every prior constant in one place. Variances, not standard deviations,
// unless the name says sd.
struct PriorConfig {
    double m_mu = 2.995732273553991;  // log 20
    double s_mu = 0.25;
    double a_sigma = 3.0;
    double b_sigma = 1.0;
    double a_delta = 2.0;
    double b_delta = 0.01;
    double game_effect_sd = 0.5;
    double alpha1_mean = 30.0;
    double alpha1_var = 4.0;
    double alpha2_logmean = -3.0;
    double alpha2_logvar = 9.0;
    double eta_logmean = 0.0;
    double eta_logvar = 1.0;
    double a_pi = 1.0;
    double b_pi = 9.0;

    // Throws std::invalid_argument when a scale entry is not positive.
    void check() const;
};

// One point in parameter space. Identifiability pins are implied zeros and
// are not stored: delta has Y-1 entries (final year pinned), nu holds
// innings 2..4, xi holds oppositions 2..O and omega is (O-1) x (D-1)
// row-major over (opposition 2..O, decade 1..D-1).
struct ParamState {
    std::vector<double> theta;
    std::vector<double> delta;
    double sigma2_delta = 0.01;
    std::vector<double> alpha1;
    std::vector<double> alpha2;
    double zeta2 = 0.0;
    std::vector<double> nu = std::vector<double>(3, 0.0);
    std::vector<double> xi;
    std::vector<double> omega;
    std::vector<double> eta;
    std::vector<double> pi;
    double mu_theta = 0.0;
    double sigma2_theta = 0.5;
    std::size_t n_decades = 1;  // D; omega alone cannot recover it when O == 1

    // Sized for dims with every entry zero and positive entries at 1 (pi 0.1).
    static ParamState zeros(const Dims& dims);

    Dims dims() const;

    // Full-length accessors including pinned levels (0-based indices).
    double year_effect(std::size_t year) const {
        return year < delta.size() ? delta[year] : 0.0;
    }
    double venue_effect(Venue v) const { return v == Venue::away ? zeta2 : 0.0; }
    double innings_effect(int match_innings) const {
        return match_innings > 1 ? nu[static_cast<std::size_t>(match_innings - 2)] : 0.0;
    }
    double opposition_effect(std::size_t q) const { return q > 0 ? xi[q - 1] : 0.0; }
    double interaction(std::size_t q, std::size_t d) const;
    std::size_t omega_index(std::size_t q, std::size_t d) const;  // requires q > 0, d < D-1

    // Fixed-order flat view used by the draws file.
    std::vector<double> flatten() const;
    static ParamState unflatten(std::span<const double> flat, const Dims& dims);
    static std::size_t flat_size(const Dims& dims);

    bool operator==(const ParamState&) const = default;
};

double ageing(double alpha1, double alpha2, double age);

// log(1 + e^t) without overflow.
double log1p_exp(double t);

// Everything except the player and year terms for a record.
double game_log_rate(const ParamState& s, const InningsRecord& rec);

double log_rate(const ParamState& s, const InningsRecord& rec);

double nb_log_pmf(int x, double eta, double lambda);

// log P(X >= x) for X ~ NB with mean lambda and size eta.
double nb_log_sf(int x, double eta, double lambda);

// Probability of a completed duck: pi + (1 - pi) (1 + lambda/eta)^{-eta}.
double duck_prob(double pi, double eta, double lambda);

// Per-innings log-likelihood given the log rate. Completed duck:
// log(pi + (1-pi) NB(0)); completed non-duck: log(1-pi) + log NB(x);
// not out: log(1-pi) + log P(X >= x).
double record_log_lik(const InningsRecord& rec, double log_lambda, double eta, double pi);

// Rate-free pieces of record_log_lik; they change only with eta, so rate
// proposals can reuse them. Results are bit-identical to the plain overload.
struct RecordConst {
    double log_eta = 0.0;
    double lgamma_term = 0.0;  // lgamma(x+eta) - lgamma(eta) - lgamma(x+1) for completed x > 0
};
RecordConst record_const(const InningsRecord& rec, double eta);
double record_log_lik(const InningsRecord& rec, double log_lambda, double eta, double pi, const RecordConst& c);

double innings_log_lik(const ParamState& s, const InningsRecord& rec);

// Serial reference: sum over records in dataset order.
double total_log_lik(const ParamState& s, const Dataset& ds);

// Same value, per-record terms evaluated in parallel and summed in record
// order, so the result is bit-identical to total_log_lik.
double total_log_lik_parallel(const ParamState& s, const Dataset& ds);

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace batrank
