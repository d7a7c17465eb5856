#pragma once

// Metropolis-within-Gibbs sampler.
//
// One iteration runs, in order: player abilities, the year-effect block
// (Newton mode + Gaussian independence proposal), the year smoothing
// variance, ageing pairs, game effects (away, innings, opposition,
// opposition x decade), heterogeneity, zero-inflation, and the ability
// hyperparameters.
//
// Randomness for element e of block b at iteration t comes from
// Rng::stream(seed, {t, b, e}), which makes per-element sweeps safe to run
// in parallel and makes checkpoint/resume exact.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "batrank/gmrf.hpp"
#include "batrank/ingest.hpp"
#include "batrank/model.hpp"
#include "batrank/parallel.hpp"

namespace batrank {

namespace block {
inline constexpr unsigned theta = 1u << 0;
inline constexpr unsigned delta = 1u << 1;
inline constexpr unsigned sigma2_delta = 1u << 2;
inline constexpr unsigned ageing = 1u << 3;
inline constexpr unsigned game = 1u << 4;
inline constexpr unsigned eta = 1u << 5;
inline constexpr unsigned pi = 1u << 6;
inline constexpr unsigned hyper = 1u << 7;
inline constexpr unsigned all = 0xffu;
}  // namespace block

struct ChainConfig {
    std::uint64_t n_iter = 205000;  // total, including burn-in
    std::uint64_t burn_in = 5000;
    std::uint64_t thin = 20;
    std::uint64_t seed = 1;
    // Multiplier on the default per-element random-walk scale, keyed by
    // block name: theta, ageing, game, eta, pi, delta (fallback sweep only).
    std::map<std::string, double> step_sizes;
    bool adapt = false;  // Robbins-Monro during burn-in, frozen afterwards
    int newton_max_iter = 20;
    double newton_tol = 1e-8;
    unsigned blocks = block::all;
    Exec exec = Exec::parallel;
    std::uint64_t checkpoint_every = 0;  // 0 disables checkpoints

    void check() const;
    std::uint64_t n_draws() const { return (n_iter - burn_in) / thin; }
    double step_scale(const std::string& block) const;
};

// Per-element random-walk scales. Scales for positive and (0,1) parameters
// are on the log and logit scale respectively.
struct StepSizes {
    std::vector<double> theta, alpha1, log_alpha2, log_eta, logit_pi;
    double zeta2 = 0.0;
    std::vector<double> nu, xi, omega, delta;

    bool operator==(const StepSizes&) const = default;
};

struct AcceptCounter {
    std::uint64_t accepted = 0;
    std::uint64_t proposed = 0;
    double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
    bool operator==(const AcceptCounter&) const = default;
};

enum class Stat : std::size_t { theta, delta, delta_fallback, ageing, zeta2, nu, xi, omega, eta, pi, count };
const char* stat_name(Stat s);
using AcceptCounts = std::array<AcceptCounter, static_cast<std::size_t>(Stat::count)>;

// Everything needed to continue a chain exactly.
struct Checkpoint {
    std::uint64_t next_iter = 0;
    ParamState state;
    StepSizes steps;
    AcceptCounts counts{};
    std::uint64_t delta_fallbacks = 0;
    std::uint64_t draws_written = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Moment-based starting point.
ParamState initial_state(const Dataset& ds, const PriorConfig& prior);

// Default scales before the per-block multiplier is applied.
StepSizes default_steps(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg);

// Gradient and Hessian of the year-effect objective with duck and not-out
// terms dropped:
//   g(d) = d'Qd / (2 s2) - sum_{completed non-ducks} [x log lambda - (eta + x) log(1 + lambda/eta)]
// evaluated at `at` (length Y-1) with every other parameter taken from s.
struct DeltaDerivatives {
    std::vector<double> gradient;
    TridiagPrecision hessian;
};
DeltaDerivatives delta_grad_hess(const ParamState& s, const Dataset& ds, std::span<const double> at);
double delta_objective(const ParamState& s, const Dataset& ds, std::span<const double> at);

// Log full conditional density of the year effects (prior plus the complete
// likelihood), up to a constant.
double delta_log_fcd(const ParamState& s, const Dataset& ds, std::span<const double> at);

struct DeltaUpdateInfo {
    bool fallback = false;
    bool accepted = false;
    int newton_iterations = 0;
    double log_accept_ratio = 0.0;
    std::vector<double> mode;
};

class Sampler {
public:
    Sampler(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg);
    Sampler(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg, ParamState init);
    Sampler(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg, const Checkpoint& ckpt);

    const ParamState& state() const { return state_; }
    void set_state(ParamState s);
    const StepSizes& steps() const { return steps_; }
    void set_steps(StepSizes s) { steps_ = std::move(s); }
    const AcceptCounts& counts() const { return counts_; }
    std::uint64_t delta_fallbacks() const { return delta_fallbacks_; }

    // Block updates for iteration `iter`.
    void update_theta(std::uint64_t iter);
    DeltaUpdateInfo update_delta_block(std::uint64_t iter);
    void gibbs_sigma2_delta(std::uint64_t iter);
    void update_ageing(std::uint64_t iter);
    void update_game_effects(std::uint64_t iter);
    void update_eta(std::uint64_t iter);
    void update_pi(std::uint64_t iter);
    void gibbs_hyper(std::uint64_t iter);

    // All enabled blocks in the fixed order.
    void iterate(std::uint64_t iter);

    double log_likelihood() const;  // sum of cached per-record terms

    Checkpoint checkpoint(std::uint64_t next_iter) const;

private:
    void refresh_cache();
    void refresh_records(std::span<const std::size_t> records);
    bool counting(std::uint64_t iter) const;
    void adapt_step(double& step, bool accepted, std::uint64_t iter) const;
    void tally(Stat s, std::span<const std::uint8_t> accepted, std::uint64_t iter);
    bool delta_fallback_sweep(std::uint64_t iter);

    // One scalar random-walk update of an additive log-rate term shared by
    // `records`. Returns whether the proposal was accepted.
    bool rw_additive(double& value, double& step, double prior_sd, std::span<const std::size_t> records,
                     Rng& rng, std::uint64_t iter);

    const Dataset& ds_;
    PriorConfig prior_;
    ChainConfig cfg_;
    RecordIndex index_;
    ParamState state_;
    StepSizes steps_;
    AcceptCounts counts_{};
    std::uint64_t delta_fallbacks_ = 0;
    std::vector<double> log_rate_;  // per record, always equal to log_rate(state_, rec)
    std::vector<double> log_lik_;   // per record, always equal to innings_log_lik(state_, rec)
    std::vector<RecordConst> lconst_;  // per record, record_const(rec, eta of its player)
};

struct ChainOutput {
    std::vector<ParamState> draws;
    std::map<std::string, double> acceptance_rates;
    ChainConfig config;
    PriorConfig prior;
    std::uint64_t dataset_fingerprint = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t delta_fallbacks = 0;
    bool interrupted = false;  // stopped early through RunHooks::stop

    // Labels carried for analysis without the dataset.
    Dims dims;
    std::vector<std::string> player_ids;
    std::vector<std::string> opposition_labels;
    int first_year = 0;
    std::vector<int> decade_start;
};

struct RunHooks {
    // Called for every stored draw instead of keeping it in ChainOutput::draws.
    std::function<void(const ParamState&)> on_draw;
    // Called every cfg.checkpoint_every iterations.
    std::function<void(const Checkpoint&)> on_checkpoint;
    // Asked after each checkpoint with the next iteration; returning true
    // ends the run there.
    std::function<bool(std::uint64_t)> stop;
};

// Hash of priors, schedule and data. The seed is left out so that the
// chains of one fit share it.
std::uint64_t config_hash(const PriorConfig& prior, const ChainConfig& cfg, std::uint64_t data_fingerprint);

ChainOutput run_chain(const Dataset& ds, const PriorConfig& prior, const ChainConfig& cfg,
                      const RunHooks& hooks = {}, const std::optional<Checkpoint>& resume = std::nullopt,
                      const std::optional<ParamState>& init = std::nullopt);

}  // namespace batrank
