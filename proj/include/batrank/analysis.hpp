#pragma once

// Posterior summaries and predictive checks computed from stored draws.
//
// Interval conventions: effect and curve bands use linearly interpolated
// (type 7) quantiles; rank intervals use the inverse empirical CDF (type 1)
// so that their ends are attainable ranks.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "batrank/ingest.hpp"
#include "batrank/parallel.hpp"
#include "batrank/sampler.hpp"

namespace batrank {

// Row-major draws x columns.
struct DrawMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    DrawMatrix() = default;
    DrawMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

// Type-7 quantile of unsorted values.
double quantile(std::vector<double> values, double p);

// Concatenates chains; they must share dataset fingerprint and config hash.
ChainOutput merge_chains(const std::vector<ChainOutput>& chains);

// (1 - pi_i) exp(theta_i) per draw and player.
DrawMatrix ability_draws(const ChainOutput& chain);

struct RankSummary {
    std::string player_id;
    std::size_t player = 0;
    double mean_peak_runs = 0.0;
    double sd_peak_runs = 0.0;
    double peak_age_mean = 0.0;
    double zero_inflation_mean = 0.0;
    double median_rank = 0.0;
    std::size_t rank_low = 0;
    std::size_t rank_high = 0;
};

// Marginal rank summaries, rank 1 = largest. Ties go to the lower player
// index. Output is in player order; ability mean/sd are filled in, the other
// descriptive fields are left at zero.
std::vector<RankSummary> rank_distribution(const DrawMatrix& ability, Exec exec = Exec::parallel);

// Rank summaries with all descriptive fields, ordered by mean peak runs
// (descending), truncated to `top` rows when top > 0.
std::vector<RankSummary> rank_table(const ChainOutput& chain, std::size_t top = 0, Exec exec = Exec::parallel);

struct EffectRow {
    std::string kind;   // year, venue, innings, opposition, hyper
    std::string level;  // e.g. "1987", "away", "2", "Team3 1990s"
    double mean = 0.0;
    double low = 0.0;   // 2.5%
    double high = 0.0;  // 97.5%
};

struct Reference {
    std::size_t opposition = 0;
    std::size_t decade = 0;
};

// Parses "label,decade" where decade is a start year such as 1990 or 1990s.
Reference parse_reference(const ChainOutput& chain, const std::string& spec);

// Multiplicative effects with 95% bands. Opposition-by-decade multipliers
// are exp(xi_q + omega_qd) divided by that of the reference cell; the
// default reference is the pinned team in the final decade.
std::vector<EffectRow> effect_summaries(const ChainOutput& chain, std::optional<Reference> ref = std::nullopt);

struct CurvePoint {
    double age = 0.0;
    double mean = 0.0;
    double low = 0.0;
    double high = 0.0;
};

// (1 - pi) exp(theta + f(a)) over the grid.
std::vector<CurvePoint> ageing_profile(const ChainOutput& chain, std::size_t player, const std::vector<double>& ages);
std::size_t player_by_id(const ChainOutput& chain, const std::string& id);

struct AdjustedRuns {
    int age = 0;  // whole years
    std::size_t innings = 0;
    double mean = 0.0;
};

// Posterior mean of the covariate-discounted average completed score at each
// whole year of age. Empty when the player has no completed innings.
std::vector<AdjustedRuns> adjusted_runs(const ChainOutput& chain, const Dataset& ds, std::size_t player);

struct CalibrationRow {
    double x = 0.0;          // midpoint of the predicted-probability range
    double predicted = 0.0;  // mean predicted probability in the group
    double observed = 0.0;   // observed proportion
    std::size_t n = 0;
    double band_low = 0.0;   // binomial 95% band around `predicted`
    double band_high = 0.0;
};

// Groups (p, outcome) pairs into at most `groups` equal-count groups of
// increasing p.
std::vector<CalibrationRow> calibrate(const std::vector<double>& p, const std::vector<std::uint8_t>& outcome,
                                      std::size_t groups = 100);

// Least-squares slope of observed on x.
double calibration_slope(const std::vector<CalibrationRow>& rows);

struct DuckPpc {
    std::vector<double> probability;  // per record; completed innings only are used below
    std::vector<std::size_t> completed;
    std::vector<double> predictive_totals;  // simulated completed-duck totals, one per draw
    std::size_t observed_total = 0;
    double predictive_low = 0.0;  // central 95%
    double predictive_high = 0.0;
    std::vector<CalibrationRow> calibration;
    double slope = 0.0;
};

DuckPpc ppc_duck(const ChainOutput& chain, const Dataset& ds, std::uint64_t seed = 1, std::size_t groups = 100,
                 Exec exec = Exec::parallel);

struct ScoreBin {
    int low = 0;
    std::optional<int> high;  // inclusive; nullopt means unbounded

    std::string label() const;
    bool contains(int x) const { return x >= low && (!high || x <= *high); }
};

// {0}, 1-9, 10-19, ..., 90-99, 100+.
std::vector<ScoreBin> default_score_bins();

// Throws std::invalid_argument on overlapping or malformed bins.
void check_bins(const std::vector<ScoreBin>& bins);

// Per completed record and bin, posterior mean of P(X in bin) under the
// zero-inflated NB law. Result is records x bins.
DrawMatrix bin_probabilities(const ChainOutput& chain, const Dataset& ds, const std::vector<ScoreBin>& bins,
                             const std::vector<std::size_t>& records, Exec exec = Exec::parallel);

struct BinCalibration {
    ScoreBin bin;
    std::vector<CalibrationRow> rows;
    double slope = 0.0;
};

std::vector<BinCalibration> ppc_runs_intervals(const ChainOutput& chain, const Dataset& ds,
                                               const std::vector<ScoreBin>& bins, std::size_t groups = 100,
                                               Exec exec = Exec::parallel);

// Writers. CSV uses a header row and full double precision.
std::string ranks_csv(const std::vector<RankSummary>& rows);
std::string effects_csv(const std::vector<EffectRow>& rows);
std::string curves_csv(const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves);
std::string adjusted_csv(const std::vector<std::pair<std::string, std::vector<AdjustedRuns>>>& rows);
std::string calibration_csv(const std::vector<CalibrationRow>& rows);
std::string bin_calibration_csv(const std::vector<BinCalibration>& tables);
std::string predictive_csv(const DuckPpc& d);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace batrank
