#include "batrank/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "batrank/rng.hpp"

namespace batrank {

namespace {

constexpr std::uint64_t kStreamPpc = 200;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_draws(const ChainOutput& chain) {
    if (chain.draws.empty()) throw std::invalid_argument("chain has no draws");
}

struct Band {
    double mean, low, high;
};

std::string decade_label(int start) { return std::to_string(start) + "s"; }

std::string fmt(double x) {
    if (!std::isfinite(x)) return "";
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Band band(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return {mean, quantile(v, 0.025), quantile(v, 0.975)};
}

}  // namespace

ChainOutput merge_chains(const std::vector<ChainOutput>& chains) {
    if (chains.empty()) throw std::invalid_argument("no chains to merge");
    ChainOutput out = chains.front();
    for (std::size_t k = 1; k < chains.size(); ++k) {
        const auto& c = chains[k];
        if (c.dataset_fingerprint != out.dataset_fingerprint) {
            throw std::invalid_argument("chains were fitted to different datasets");
        }
        if (c.config_hash != out.config_hash) throw std::invalid_argument("chains have different configurations");
        out.draws.insert(out.draws.end(), c.draws.begin(), c.draws.end());
        out.delta_fallbacks += c.delta_fallbacks;
    }
    // Pooled acceptance is the plain average across chains.
    std::map<std::string, double> rates;
    for (const auto& c : chains) {
        for (const auto& [k, v] : c.acceptance_rates) rates[k] += v / static_cast<double>(chains.size());
    }
    out.acceptance_rates = rates;
    return out;
}

DrawMatrix ability_draws(const ChainOutput& chain) {
    require_draws(chain);
    const std::size_t p = chain.dims.players;
    DrawMatrix m(chain.draws.size(), p);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const auto& s = chain.draws[r];
        for (std::size_t i = 0; i < p; ++i) m.at(r, i) = (1.0 - s.pi[i]) * std::exp(s.theta[i]);
    }
    return m;
}

std::vector<RankSummary> rank_distribution(const DrawMatrix& ability, Exec exec) {
    const std::size_t n = ability.rows;
    const std::size_t p = ability.cols;
    if (p < 2) throw std::invalid_argument("ranking needs at least two players");
    if (n == 0) throw std::invalid_argument("ranking needs at least one draw");

    std::vector<std::uint32_t> rank(n * p);
    parallel_for(exec, n, [&](std::size_t r) {
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return ability.at(r, a) > ability.at(r, b); });
        for (std::size_t k = 0; k < p; ++k) rank[r * p + order[k]] = static_cast<std::uint32_t>(k + 1);
    });

    std::vector<RankSummary> out(p);
    parallel_for(exec, p, [&](std::size_t i) {
        std::vector<std::uint32_t> rk(n);
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            rk[r] = rank[r * p + i];
            sum += ability.at(r, i);
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) ss += (ability.at(r, i) - mean) * (ability.at(r, i) - mean);
        std::sort(rk.begin(), rk.end());
        auto type1 = [&](double q) {
            const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
            return rk[std::clamp<std::size_t>(k, 1, n) - 1];
        };
        RankSummary s;
        s.player = i;
        s.mean_peak_runs = mean;
        s.sd_peak_runs = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        s.median_rank = n % 2 ? rk[n / 2] : 0.5 * (rk[n / 2 - 1] + rk[n / 2]);
        s.rank_low = type1(0.025);
        s.rank_high = type1(0.975);
        out[i] = s;
    });
    return out;
}

std::vector<RankSummary> rank_table(const ChainOutput& chain, std::size_t top, Exec exec) {
    auto rows = rank_distribution(ability_draws(chain), exec);
    const double n = static_cast<double>(chain.draws.size());
    for (auto& r : rows) {
        double a1 = 0.0;
        double pi = 0.0;
        for (const auto& s : chain.draws) {
            a1 += s.alpha1[r.player];
            pi += s.pi[r.player];
        }
        r.peak_age_mean = a1 / n;
        r.zero_inflation_mean = pi / n;
        r.player_id = chain.player_ids.at(r.player);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RankSummary& a, const RankSummary& b) { return a.mean_peak_runs > b.mean_peak_runs; });
    if (top > 0 && rows.size() > top) rows.resize(top);
    return rows;
}

Reference parse_reference(const ChainOutput& chain, const std::string& spec) {
    const auto comma = spec.rfind(',');
    if (comma == std::string::npos) throw std::invalid_argument("reference must look like TEAM,DECADE");
    const std::string team = spec.substr(0, comma);
    std::string dec = spec.substr(comma + 1);
    if (!dec.empty() && dec.back() == 's') dec.pop_back();
    Reference ref;
    const auto it = std::find(chain.opposition_labels.begin(), chain.opposition_labels.end(), team);
    if (it == chain.opposition_labels.end()) throw std::invalid_argument("unknown reference team '" + team + "'");
    ref.opposition = static_cast<std::size_t>(it - chain.opposition_labels.begin());
    int start = 0;
    try {
        std::size_t used = 0;
        start = std::stoi(dec, &used);
        if (used != dec.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw std::invalid_argument("reference decade '" + spec.substr(comma + 1) + "' is not a year");
    }
    const auto d = std::find(chain.decade_start.begin(), chain.decade_start.end(), start);
    if (d == chain.decade_start.end()) {
        throw std::invalid_argument("reference decade " + std::to_string(start) + " is outside the data");
    }
    ref.decade = static_cast<std::size_t>(d - chain.decade_start.begin());
    return ref;
}

std::vector<EffectRow> effect_summaries(const ChainOutput& chain, std::optional<Reference> ref) {
    require_draws(chain);
    const std::size_t n = chain.draws.size();
    const Dims& dims = chain.dims;
    const Reference r = ref.value_or(Reference{0, dims.decades > 0 ? dims.decades - 1 : 0});
    if (dims.oppositions > 0 && (r.opposition >= dims.oppositions || r.decade >= dims.decades)) {
        throw std::invalid_argument("reference cell outside the grid");
    }

    std::vector<EffectRow> rows;
    std::vector<double> v(n);
    auto add = [&](std::string kind, std::string level, auto&& value) {
        for (std::size_t k = 0; k < n; ++k) v[k] = value(chain.draws[k]);
        const Band b = band(v);
        rows.push_back({std::move(kind), std::move(level), b.mean, b.low, b.high});
    };

    add("hyper", "mu_theta", [](const ParamState& s) { return s.mu_theta; });
    add("hyper", "sigma2_theta", [](const ParamState& s) { return s.sigma2_theta; });
    add("hyper", "sigma2_delta", [](const ParamState& s) { return s.sigma2_delta; });
    for (std::size_t y = 0; y < dims.years; ++y) {
        add("year", std::to_string(chain.first_year + static_cast<int>(y)),
            [y](const ParamState& s) { return std::exp(s.year_effect(y)); });
    }
    add("venue", "home", [](const ParamState& s) { return std::exp(s.venue_effect(Venue::home)); });
    add("venue", "away", [](const ParamState& s) { return std::exp(s.venue_effect(Venue::away)); });
    for (int m = 1; m <= 4; ++m) {
        add("innings", std::to_string(m), [m](const ParamState& s) { return std::exp(s.innings_effect(m)); });
    }
    for (std::size_t q = 0; q < dims.oppositions; ++q) {
        for (std::size_t d = 0; d < dims.decades; ++d) {
            add("opposition", chain.opposition_labels.at(q) + " " + decade_label(chain.decade_start.at(d)),
                [&, q, d](const ParamState& s) {
                    const double cell = s.opposition_effect(q) + s.interaction(q, d);
                    const double base = s.opposition_effect(r.opposition) + s.interaction(r.opposition, r.decade);
                    return std::exp(cell - base);
                });
        }
    }
    return rows;
}

std::size_t player_by_id(const ChainOutput& chain, const std::string& id) {
    const auto it = std::find(chain.player_ids.begin(), chain.player_ids.end(), id);
    if (it == chain.player_ids.end()) throw std::invalid_argument("unknown player '" + id + "'");
    return static_cast<std::size_t>(it - chain.player_ids.begin());
}

std::vector<CurvePoint> ageing_profile(const ChainOutput& chain, std::size_t player, const std::vector<double>& ages) {
    require_draws(chain);
    if (player >= chain.dims.players) throw std::invalid_argument("unknown player index");
    std::vector<CurvePoint> out;
    std::vector<double> v(chain.draws.size());
    for (double a : ages) {
        for (std::size_t k = 0; k < v.size(); ++k) {
            const auto& s = chain.draws[k];
            v[k] = (1.0 - s.pi[player]) * std::exp(s.theta[player] + ageing(s.alpha1[player], s.alpha2[player], a));
        }
        const Band b = band(v);
        out.push_back({a, b.mean, b.low, b.high});
    }
    return out;
}

std::vector<AdjustedRuns> adjusted_runs(const ChainOutput& chain, const Dataset& ds, std::size_t player) {
    require_draws(chain);
    if (player >= ds.dims.players) throw std::invalid_argument("unknown player index");
    std::map<int, std::vector<std::size_t>> by_age;
    for (std::size_t k = 0; k < ds.records.size(); ++k) {
        const auto& r = ds.records[k];
        if (r.player == player && r.completed()) by_age[static_cast<int>(std::floor(r.age))].push_back(k);
    }
    std::vector<AdjustedRuns> out;
    for (const auto& [age, recs] : by_age) {
        double total = 0.0;
        for (const auto& s : chain.draws) {
            double sum = 0.0;
            for (std::size_t k : recs) {
                const auto& r = ds.records[k];
                sum += r.runs * std::exp(-(s.year_effect(r.year) + game_log_rate(s, r)));
            }
            total += sum / static_cast<double>(recs.size());
        }
        out.push_back({age, recs.size(), total / static_cast<double>(chain.draws.size())});
    }
    return out;
}

std::vector<CalibrationRow> calibrate(const std::vector<double>& p, const std::vector<std::uint8_t>& outcome,
                                      std::size_t groups) {
    if (p.size() != outcome.size()) throw std::invalid_argument("calibrate: size mismatch");
    if (groups == 0) throw std::invalid_argument("calibrate: need at least one group");
    const std::size_t n = p.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    const std::size_t g = std::min(groups, n);
    std::vector<CalibrationRow> rows;
    for (std::size_t j = 0; j < g; ++j) {
        const std::size_t lo = j * n / g;
        const std::size_t hi = (j + 1) * n / g;
        if (hi == lo) continue;
        CalibrationRow row;
        double ps = 0.0;
        double hits = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            ps += p[order[k]];
            hits += outcome[order[k]];
        }
        row.n = hi - lo;
        const double m = static_cast<double>(row.n);
        row.x = 0.5 * (p[order[lo]] + p[order[hi - 1]]);
        row.predicted = ps / m;
        row.observed = hits / m;
        const double half = 1.96 * std::sqrt(row.predicted * (1.0 - row.predicted) / m);
        row.band_low = std::max(0.0, row.predicted - half);
        row.band_high = std::min(1.0, row.predicted + half);
        rows.push_back(row);
    }
    return rows;
}

double calibration_slope(const std::vector<CalibrationRow>& rows) {
    if (rows.size() < 2) return kNaN;
    double mx = 0.0;
    double my = 0.0;
    for (const auto& r : rows) {
        mx += r.x;
        my += r.observed;
    }
    mx /= static_cast<double>(rows.size());
    my /= static_cast<double>(rows.size());
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& r : rows) {
        sxx += (r.x - mx) * (r.x - mx);
        sxy += (r.x - mx) * (r.observed - my);
    }
    return sxx > 0.0 ? sxy / sxx : kNaN;
}

DuckPpc ppc_duck(const ChainOutput& chain, const Dataset& ds, std::uint64_t seed, std::size_t groups, Exec exec) {
    require_draws(chain);
    if (!(chain.dims == ds.dims)) throw std::invalid_argument("chain and dataset dimensions differ");
    const std::size_t n = ds.records.size();
    const std::size_t nd = chain.draws.size();

    DuckPpc out;
    for (std::size_t k = 0; k < n; ++k) {
        if (ds.records[k].completed()) {
            out.completed.push_back(k);
            out.observed_total += ds.records[k].duck;
        }
    }

    auto prob = [&](const ParamState& s, const InningsRecord& r) {
        return duck_prob(s.pi[r.player], s.eta[r.player], std::exp(log_rate(s, r)));
    };

    // Posterior mean per record, accumulated in draw order.
    out.probability.assign(n, 0.0);
    parallel_for(exec, n, [&](std::size_t k) {
        double sum = 0.0;
        for (const auto& s : chain.draws) sum += prob(s, ds.records[k]);
        out.probability[k] = sum / static_cast<double>(nd);
    });

    // One simulated completed-duck total per draw.
    out.predictive_totals.assign(nd, 0.0);
    parallel_for(exec, nd, [&](std::size_t d) {
        const auto& s = chain.draws[d];
        Rng rng = Rng::stream(seed, {kStreamPpc, d});
        double total = 0.0;
        for (std::size_t k : out.completed) total += rng.bernoulli(prob(s, ds.records[k])) ? 1.0 : 0.0;
        out.predictive_totals[d] = total;
    });

    out.predictive_low = quantile(out.predictive_totals, 0.025);
    out.predictive_high = quantile(out.predictive_totals, 0.975);

    std::vector<double> p;
    std::vector<std::uint8_t> y;
    for (std::size_t k : out.completed) {
        p.push_back(out.probability[k]);
        y.push_back(ds.records[k].duck);
    }
    out.calibration = calibrate(p, y, groups);
    out.slope = calibration_slope(out.calibration);
    return out;
}

std::string ScoreBin::label() const {
    if (!high) return std::to_string(low) + "+";
    if (*high == low) return std::to_string(low);
    return std::to_string(low) + "-" + std::to_string(*high);
}

std::vector<ScoreBin> default_score_bins() {
    std::vector<ScoreBin> bins{{0, 0}, {1, 9}};
    for (int a = 10; a < 100; a += 10) bins.push_back({a, a + 9});
    bins.push_back({100, std::nullopt});
    return bins;
}

void check_bins(const std::vector<ScoreBin>& bins) {
    if (bins.empty()) throw std::invalid_argument("no score bins");
    auto sorted = bins;
    for (const auto& b : sorted) {
        if (b.low < 0) throw std::invalid_argument("score bin " + b.label() + " starts below zero");
        if (b.high && *b.high < b.low) throw std::invalid_argument("score bin has high < low");
    }
    std::sort(sorted.begin(), sorted.end(), [](const ScoreBin& a, const ScoreBin& b) { return a.low < b.low; });
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        if (!sorted[k].high || *sorted[k].high >= sorted[k + 1].low) {
            throw std::invalid_argument("score bins " + sorted[k].label() + " and " + sorted[k + 1].label() +
                                        " overlap");
        }
    }
}

DrawMatrix bin_probabilities(const ChainOutput& chain, const Dataset& ds, const std::vector<ScoreBin>& bins,
                             const std::vector<std::size_t>& records, Exec exec) {
    require_draws(chain);
    check_bins(bins);
    int top = 0;  // largest score whose cdf is needed
    for (const auto& b : bins) top = std::max(top, b.high ? *b.high : b.low - 1);
    const std::size_t nb = bins.size();
    DrawMatrix out(records.size(), nb);
    const double nd = static_cast<double>(chain.draws.size());

    parallel_for(exec, records.size(), [&](std::size_t j) {
        const auto& r = ds.records[records[j]];
        std::vector<double> cdf(static_cast<std::size_t>(top) + 1);
        auto cdf_at = [&](int x) { return x < 0 ? 0.0 : cdf[static_cast<std::size_t>(x)]; };
        for (const auto& s : chain.draws) {
            const double eta = s.eta[r.player];
            const double pi = s.pi[r.player];
            const double lr = log_rate(s, r);
            const double log_beta = lr - std::log(eta);
            // pmf(0) = (1 + beta)^-eta; pmf(k+1) = pmf(k) (k + eta)/(k + 1) * beta/(1 + beta).
            const double ratio = std::exp(log_beta - log1p_exp(log_beta));
            double pmf = std::exp(-eta * log1p_exp(log_beta));
            double acc = 0.0;
            for (int k = 0; k <= top; ++k) {
                acc += pmf;
                cdf[static_cast<std::size_t>(k)] = std::min(acc, 1.0);
                pmf *= (k + eta) / (k + 1.0) * ratio;
            }
            for (std::size_t b = 0; b < nb; ++b) {
                const auto& bin = bins[b];
                const double upper = bin.high ? cdf_at(*bin.high) : 1.0;
                const double nbp = upper - cdf_at(bin.low - 1);
                out.at(j, b) += ((1.0 - pi) * nbp + (bin.low == 0 ? pi : 0.0)) / nd;
            }
        }
    });
    return out;
}

std::vector<BinCalibration> ppc_runs_intervals(const ChainOutput& chain, const Dataset& ds,
                                               const std::vector<ScoreBin>& bins, std::size_t groups, Exec exec) {
    if (!(chain.dims == ds.dims)) throw std::invalid_argument("chain and dataset dimensions differ");
    std::vector<std::size_t> completed;
    for (std::size_t k = 0; k < ds.records.size(); ++k) {
        if (ds.records[k].completed()) completed.push_back(k);
    }
    const DrawMatrix prob = bin_probabilities(chain, ds, bins, completed, exec);
    std::vector<BinCalibration> out;
    for (std::size_t b = 0; b < bins.size(); ++b) {
        std::vector<double> p(completed.size());
        std::vector<std::uint8_t> y(completed.size());
        for (std::size_t j = 0; j < completed.size(); ++j) {
            p[j] = prob.at(j, b);
            y[j] = bins[b].contains(ds.records[completed[j]].runs);
        }
        BinCalibration c;
        c.bin = bins[b];
        c.rows = calibrate(p, y, groups);
        c.slope = calibration_slope(c.rows);
        out.push_back(std::move(c));
    }
    return out;
}

std::string ranks_csv(const std::vector<RankSummary>& rows) {
    std::ostringstream os;
    os << "position,player,mean_peak_runs,sd_peak_runs,peak_age_mean,zero_inflation_mean,median_rank,rank_low,"
          "rank_high\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        os << k + 1 << ',' << csv_field(r.player_id) << ',' << fmt(r.mean_peak_runs) << ',' << fmt(r.sd_peak_runs)
           << ',' << fmt(r.peak_age_mean) << ',' << fmt(r.zero_inflation_mean) << ',' << fmt(r.median_rank) << ','
           << r.rank_low << ',' << r.rank_high << '\n';
    }
    return os.str();
}

std::string effects_csv(const std::vector<EffectRow>& rows) {
    std::ostringstream os;
    os << "kind,level,mean,low,high\n";
    for (const auto& r : rows) {
        os << r.kind << ',' << csv_field(r.level) << ',' << fmt(r.mean) << ',' << fmt(r.low) << ',' << fmt(r.high)
           << '\n';
    }
    return os.str();
}

std::string curves_csv(const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves) {
    std::ostringstream os;
    os << "player,age,mean,low,high\n";
    for (const auto& [id, pts] : curves) {
        for (const auto& p : pts) {
            os << csv_field(id) << ',' << fmt(p.age) << ',' << fmt(p.mean) << ',' << fmt(p.low) << ',' << fmt(p.high)
               << '\n';
        }
    }
    return os.str();
}

std::string adjusted_csv(const std::vector<std::pair<std::string, std::vector<AdjustedRuns>>>& rows) {
    std::ostringstream os;
    os << "player,age,innings,adjusted_mean\n";
    for (const auto& [id, pts] : rows) {
        for (const auto& a : pts) os << csv_field(id) << ',' << a.age << ',' << a.innings << ',' << fmt(a.mean) << '\n';
    }
    return os.str();
}

std::string calibration_csv(const std::vector<CalibrationRow>& rows) {
    std::ostringstream os;
    os << "x,predicted,observed,n,band_low,band_high\n";
    for (const auto& r : rows) {
        os << fmt(r.x) << ',' << fmt(r.predicted) << ',' << fmt(r.observed) << ',' << r.n << ',' << fmt(r.band_low)
           << ',' << fmt(r.band_high) << '\n';
    }
    return os.str();
}

std::string bin_calibration_csv(const std::vector<BinCalibration>& tables) {
    std::ostringstream os;
    os << "bin,x,predicted,observed,n,band_low,band_high\n";
    for (const auto& t : tables) {
        for (const auto& r : t.rows) {
            os << t.bin.label() << ',' << fmt(r.x) << ',' << fmt(r.predicted) << ',' << fmt(r.observed) << ',' << r.n
               << ',' << fmt(r.band_low) << ',' << fmt(r.band_high) << '\n';
        }
    }
    return os.str();
}

std::string predictive_csv(const DuckPpc& d) {
    std::map<long long, std::size_t> hist;
    for (double t : d.predictive_totals) ++hist[static_cast<long long>(t)];
    std::ostringstream os;
    os << "total_ducks,draws\n";
    for (const auto& [t, c] : hist) os << t << ',' << c << '\n';
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace batrank
