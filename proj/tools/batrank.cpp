// batrank command-line tool: fit, summarize, ppc, simulate.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "batrank/analysis.hpp"
#include "batrank/chain_io.hpp"
#include "batrank/ingest.hpp"
#include "batrank/model.hpp"
#include "batrank/sampler.hpp"
#include "batrank/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace batrank;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_sigint(int) { g_interrupted = 1; }

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- options ---------------------------------------------------------------

struct FitOptions {
    std::string data;
    std::string out;
    std::uint64_t iters = 205000;
    std::uint64_t burnin = 5000;
    std::uint64_t thin = 20;
    std::uint64_t seed = 1;
    std::size_t chains = 1;
    std::uint64_t checkpoint_every = 0;
    bool resume = false;
    std::uint64_t stop_after = 0;
    bool adapt = false;
    bool serial = false;
    int threads = 0;
    std::vector<std::string> steps;
    std::vector<std::string> priors;
};

struct SummarizeOptions {
    std::vector<std::string> chains;
    std::string out;
    std::string data;
    std::size_t top = 0;
    std::string reference;
    std::size_t curves = 10;
};

struct PpcOptions {
    std::vector<std::string> chains;
    std::string data;
    std::string out;
    std::size_t groups = 100;
    std::uint64_t seed = 1;
};

struct SimulateOptions {
    std::string scenario;
    std::string out;
    std::string truth;
    std::optional<std::uint64_t> seed;
};

struct Options {
    std::string config;
    FitOptions fit;
    SummarizeOptions summarize;
    PpcOptions ppc;
    SimulateOptions simulate;
};

std::map<std::string, double> parse_pairs(const std::vector<std::string>& items, const char* what) {
    std::map<std::string, double> out;
    for (const auto& it : items) {
        const auto eq = it.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError(std::string(what) + " must look like key=value: " + it);
        const std::string key = it.substr(0, eq);
        const std::string val = it.substr(eq + 1);
        try {
            std::size_t used = 0;
            out[key] = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw UsageError(std::string(what) + " " + key + " needs a number, got '" + val + "'");
        }
    }
    return out;
}

PriorConfig prior_from_overrides(const std::vector<std::string>& items) {
    PriorConfig p;
    const std::map<std::string, double*> fields{
        {"m_mu", &p.m_mu},
        {"s_mu", &p.s_mu},
        {"a_sigma", &p.a_sigma},
        {"b_sigma", &p.b_sigma},
        {"a_delta", &p.a_delta},
        {"b_delta", &p.b_delta},
        {"game_effect_sd", &p.game_effect_sd},
        {"alpha1_mean", &p.alpha1_mean},
        {"alpha1_var", &p.alpha1_var},
        {"alpha2_logmean", &p.alpha2_logmean},
        {"alpha2_logvar", &p.alpha2_logvar},
        {"eta_logmean", &p.eta_logmean},
        {"eta_logvar", &p.eta_logvar},
        {"a_pi", &p.a_pi},
        {"b_pi", &p.b_pi},
    };
    for (const auto& [k, v] : parse_pairs(items, "--prior")) {
        auto it = fields.find(k);
        if (it == fields.end()) throw UsageError("unknown prior parameter '" + k + "'");
        *it->second = v;
    }
    try {
        p.check();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return p;
}

void add_options(CLI::App& app, Options& o) {
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    auto* fit = app.add_subcommand("fit", "Run MCMC chains on an innings CSV");
    fit->add_option("--config", o.config, "Flat key = value file; command-line flags take precedence");
    fit->add_option("--data", o.fit.data, "Innings CSV")->required();
    fit->add_option("--out", o.fit.out, "Output directory")->required();
    fit->add_option("--iters", o.fit.iters, "Total iterations including burn-in")->capture_default_str();
    fit->add_option("--burnin", o.fit.burnin, "Burn-in iterations")->capture_default_str();
    fit->add_option("--thin", o.fit.thin, "Keep every n-th post-burn-in draw")->capture_default_str();
    fit->add_option("--seed", o.fit.seed, "Seed of chain 1; chain k uses seed + k - 1")->capture_default_str();
    fit->add_option("--chains", o.fit.chains, "Independent chains, run concurrently")->check(CLI::PositiveNumber);
    fit->add_option("--checkpoint-every", o.fit.checkpoint_every, "Checkpoint interval in iterations (0 = off)");
    fit->add_flag("--resume", o.fit.resume, "Continue from the checkpoints in --out");
    fit->add_option("--stop-after", o.fit.stop_after,
                    "Stop at the first checkpoint at or after this iteration, keeping it for --resume");
    fit->add_flag("--adapt", o.fit.adapt, "Adapt random-walk scales during burn-in");
    fit->add_flag("--serial", o.fit.serial, "Use the serial kernels");
    fit->add_option("--threads", o.fit.threads, "OpenMP threads per chain (0 = runtime default)");
    fit->add_option("--step", o.fit.steps, "Step multiplier, block=value (theta, ageing, game, eta, pi, delta)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    fit->add_option("--prior", o.fit.priors, "Prior override, name=value")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    auto* sum = app.add_subcommand("summarize", "Rank table, effect tables and ageing curves");
    sum->add_option("--config", o.config, "Flat key = value file");
    sum->add_option("chains", o.summarize.chains, "Draw files")->required()->check(CLI::ExistingFile);
    sum->add_option("--out", o.summarize.out, "Output directory")->required();
    sum->add_option("--data", o.summarize.data, "Innings CSV; enables adjusted runs");
    sum->add_option("--top", o.summarize.top, "Rows in the rank table (0 = all)");
    sum->add_option("--reference", o.summarize.reference, "Opposition multipliers relative to TEAM,DECADE");
    sum->add_option("--curves", o.summarize.curves, "Ageing curves for this many top-ranked players");

    auto* ppc = app.add_subcommand("ppc", "Posterior predictive calibration of ducks and score intervals");
    ppc->add_option("--config", o.config, "Flat key = value file");
    ppc->add_option("chains", o.ppc.chains, "Draw files")->required()->check(CLI::ExistingFile);
    ppc->add_option("--data", o.ppc.data, "Innings CSV the chains were fitted to")->required();
    ppc->add_option("--out", o.ppc.out, "Output directory")->required();
    ppc->add_option("--groups", o.ppc.groups, "Calibration groups")->check(CLI::PositiveNumber);
    ppc->add_option("--seed", o.ppc.seed, "Seed for predictive simulation");

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic innings CSV");
    sim->add_option("--config", o.config, "Flat key = value file");
    sim->add_option("--scenario", o.simulate.scenario, "Scenario JSON (default: built-in demo scenario)");
    sim->add_option("--out", o.simulate.out, "Output CSV")->required();
    sim->add_option("--truth", o.simulate.truth, "Also write the generating parameters as JSON");
    sim->add_option("--seed", o.simulate.seed, "Overrides the scenario seed");
}

// "key = value" lines; '#' starts a comment.
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "config") throw UsageError(path + ": config files cannot include other config files");
        tokens.push_back("--" + key + "=" + value);
    }
    return tokens;
}

// ---- fit ------------------------------------------------------------------

Dataset load_data(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("data file not found: " + path);
    return load_csv(path);
}

void print_acceptance(std::ostream& os, std::size_t chain, const ChainOutput& out) {
    os << "chain " << chain + 1 << " acceptance:";
    for (const auto& [k, v] : out.acceptance_rates) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " %s=%.3f", k.c_str(), v);
        os << buf;
    }
    if (out.delta_fallbacks) os << " (year-effect fallbacks: " << out.delta_fallbacks << ")";
    os << '\n';
}

int cmd_fit(const FitOptions& o) {
    const Dataset ds = load_data(o.data);
    for (const auto& w : validate(ds)) std::cerr << "warning: " << w << '\n';
    const PriorConfig prior = prior_from_overrides(o.priors);

    ChainConfig base;
    base.n_iter = o.iters;
    base.burn_in = o.burnin;
    base.thin = o.thin;
    base.adapt = o.adapt;
    base.exec = o.serial ? Exec::serial : Exec::parallel;
    base.checkpoint_every = o.checkpoint_every;
    base.step_sizes = parse_pairs(o.steps, "--step");
    try {
        base.check();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (o.stop_after > 0 && o.checkpoint_every == 0) throw UsageError("--stop-after needs --checkpoint-every");
    if (o.checkpoint_every > 0) std::signal(SIGINT, on_sigint);  // stop at the next checkpoint

    fs::create_directories(o.out);
    std::cout << "data: " << ds.records.size() << " innings, " << ds.dims.players << " players, " << ds.dims.years
              << " years, " << ds.dims.oppositions << " oppositions, " << ds.dims.decades << " decades\n";
    std::cout << "config hash: " << hex64(config_hash(prior, base, fingerprint(ds))) << '\n';

    std::vector<ChainOutput> results(o.chains);
    std::vector<std::exception_ptr> errors(o.chains);
    std::vector<bool> skipped(o.chains, false);
    const auto t0 = std::chrono::steady_clock::now();

    auto run_one = [&](std::size_t k) {
        try {
#ifdef _OPENMP
            if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
            ChainConfig cfg = base;
            cfg.seed = o.seed + k;
            const auto dpath = draws_path(o.out, k);
            const auto cpath = checkpoint_path(o.out, k);

            std::optional<Checkpoint> resume;
            if (o.resume) {
                if (!fs::exists(cpath)) {
                    if (fs::exists(summary_path(dpath)) && fs::exists(dpath)) {
                        skipped[k] = true;  // finished before the interruption
                        results[k] = read_chain_header(dpath);
                        return;
                    }
                    throw UsageError("no checkpoint to resume from: " + cpath.string());
                }
                resume = load_checkpoint(cpath);
            }

            ChainOutput meta;
            meta.config = cfg;
            meta.prior = prior;
            meta.dataset_fingerprint = fingerprint(ds);
            meta.config_hash = config_hash(prior, cfg, meta.dataset_fingerprint);
            meta.dims = ds.dims;
            meta.player_ids = ds.player_ids;
            meta.opposition_labels = ds.opposition_labels;
            meta.first_year = ds.first_year;
            meta.decade_start = ds.decade_start;

            std::unique_ptr<DrawWriter> writer =
                resume ? std::make_unique<DrawWriter>(dpath, meta, resume->draws_written)
                       : std::make_unique<DrawWriter>(dpath, meta);
            RunHooks hooks;
            hooks.on_draw = [&](const ParamState& s) { writer->write(s); };
            hooks.on_checkpoint = [&](const Checkpoint& c) {
                writer->flush();
                save_checkpoint(cpath, c);
            };
            hooks.stop = [&](std::uint64_t next) {
                return g_interrupted != 0 || (o.stop_after > 0 && next >= o.stop_after);
            };
            ChainOutput out = run_chain(ds, prior, cfg, hooks, resume);
            writer->flush();
            if (out.interrupted) {
                results[k] = std::move(out);
                return;
            }
            write_summary(summary_path(dpath), out);
            std::error_code ec;
            fs::remove(cpath, ec);
            results[k] = std::move(out);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };

    if (o.chains == 1) {
        run_one(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < o.chains; ++k) pool.emplace_back(run_one, k);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t k = 0; k < o.chains; ++k) {
        if (skipped[k]) {
            std::cout << "chain " << k + 1 << " already complete\n";
            continue;
        }
        if (results[k].interrupted) {
            std::cout << "chain " << k + 1 << " stopped at a checkpoint; continue with --resume\n";
            continue;
        }
        print_acceptance(std::cout, k, results[k]);
        std::cout << "chain " << k + 1 << " draws: " << draws_path(o.out, k).string() << '\n';
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "elapsed: %.1f s\n", secs);
    std::cout << buf;
    return 0;
}

// ---- summarize / ppc ---------------------------------------------------------

ChainOutput load_chains(const std::vector<std::string>& paths) {
    std::vector<ChainOutput> chains;
    for (const auto& p : paths) chains.push_back(read_chain(p));
    try {
        return merge_chains(chains);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void check_data_matches(const ChainOutput& chain, const Dataset& ds, const std::string& path) {
    if (fingerprint(ds) != chain.dataset_fingerprint) {
        throw UsageError("dataset " + path + " is not the one the chains were fitted to");
    }
}

json rank_json(const RankSummary& r) {
    return {{"player", r.player_id},         {"mean_peak_runs", r.mean_peak_runs},
            {"sd_peak_runs", r.sd_peak_runs}, {"peak_age_mean", r.peak_age_mean},
            {"zero_inflation_mean", r.zero_inflation_mean}, {"median_rank", r.median_rank},
            {"rank_low", r.rank_low},         {"rank_high", r.rank_high}};
}

json calib_json(const std::vector<CalibrationRow>& rows) {
    json a = json::array();
    for (const auto& r : rows) {
        a.push_back({{"x", r.x}, {"predicted", r.predicted}, {"observed", r.observed}, {"n", r.n},
                     {"band_low", r.band_low}, {"band_high", r.band_high}});
    }
    return a;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_summarize(const SummarizeOptions& o) {
    const ChainOutput chain = load_chains(o.chains);
    if (chain.draws.empty()) throw UsageError("chains contain no draws");
    std::optional<Dataset> ds;
    if (!o.data.empty()) {
        ds = load_data(o.data);
        check_data_matches(chain, *ds, o.data);
    }
    std::optional<Reference> ref;
    if (!o.reference.empty()) {
        try {
            ref = parse_reference(chain, o.reference);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }

    fs::create_directories(o.out);
    const auto all_ranks = rank_table(chain, 0);
    std::vector<RankSummary> ranks = all_ranks;
    if (o.top > 0 && ranks.size() > o.top) ranks.resize(o.top);
    const auto effects = effect_summaries(chain, ref);

    std::vector<double> grid;
    for (double a = 16.0; a <= 45.0 + 1e-9; a += 0.5) grid.push_back(a);
    std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
    for (std::size_t k = 0; k < std::min(o.curves, all_ranks.size()); ++k) {
        curves.emplace_back(all_ranks[k].player_id, ageing_profile(chain, all_ranks[k].player, grid));
    }
    std::vector<std::pair<std::string, std::vector<AdjustedRuns>>> adjusted;
    if (ds) {
        for (std::size_t k = 0; k < std::min(o.curves, all_ranks.size()); ++k) {
            adjusted.emplace_back(all_ranks[k].player_id, adjusted_runs(chain, *ds, all_ranks[k].player));
        }
    }

    write_text(fs::path(o.out) / "ranks.csv", ranks_csv(ranks));
    write_text(fs::path(o.out) / "effects.csv", effects_csv(effects));
    write_text(fs::path(o.out) / "ageing.csv", curves_csv(curves));
    if (ds) write_text(fs::path(o.out) / "adjusted_runs.csv", adjusted_csv(adjusted));

    json report;
    report["config_hash"] = hex64(chain.config_hash);
    report["dataset_fingerprint"] = hex64(chain.dataset_fingerprint);
    report["draws"] = chain.draws.size();
    report["chains"] = o.chains.size();
    report["acceptance_rates"] = chain.acceptance_rates;
    report["ranks"] = json::array();
    for (const auto& r : ranks) report["ranks"].push_back(rank_json(r));
    report["effects"] = json::array();
    for (const auto& e : effects) {
        report["effects"].push_back(
            {{"kind", e.kind}, {"level", e.level}, {"mean", e.mean}, {"low", e.low}, {"high", e.high}});
    }
    if (ref) {
        report["reference"] = {{"opposition", chain.opposition_labels[ref->opposition]},
                               {"decade", chain.decade_start[ref->decade]}};
    }
    report["ageing"] = json::object();
    for (const auto& [id, pts] : curves) {
        json a = json::array();
        for (const auto& p : pts) a.push_back({{"age", p.age}, {"mean", p.mean}, {"low", p.low}, {"high", p.high}});
        report["ageing"][id] = a;
    }
    if (ds) {
        report["adjusted_runs"] = json::object();
        for (const auto& [id, pts] : adjusted) {
            json a = json::array();
            for (const auto& p : pts) a.push_back({{"age", p.age}, {"innings", p.innings}, {"mean", p.mean}});
            report["adjusted_runs"][id] = a;
        }
    }
    write_text(fs::path(o.out) / "summary.json", report.dump(2) + "\n");

    std::cout << "config hash: " << hex64(chain.config_hash) << ", " << chain.draws.size() << " draws\n";
    std::cout << " pos  player                 runs     sd   peak   pi   median  interval\n";
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        const auto& r = ranks[k];
        char buf[160];
        std::snprintf(buf, sizeof buf, "%4zu  %-20s %6.1f %6.1f %6.1f %5.2f %7.1f  (%zu-%zu)\n", k + 1,
                      r.player_id.c_str(), r.mean_peak_runs, r.sd_peak_runs, r.peak_age_mean, r.zero_inflation_mean,
                      r.median_rank, r.rank_low, r.rank_high);
        std::cout << buf;
    }
    return 0;
}

int cmd_ppc(const PpcOptions& o) {
    const ChainOutput chain = load_chains(o.chains);
    if (chain.draws.empty()) throw UsageError("chains contain no draws");
    const Dataset ds = load_data(o.data);
    check_data_matches(chain, ds, o.data);

    const DuckPpc duck = ppc_duck(chain, ds, o.seed, o.groups);
    const auto runs = ppc_runs_intervals(chain, ds, default_score_bins(), o.groups);

    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "duck_calibration.csv", calibration_csv(duck.calibration));
    write_text(fs::path(o.out) / "duck_predictive.csv", predictive_csv(duck));
    write_text(fs::path(o.out) / "runs_calibration.csv", bin_calibration_csv(runs));

    json report;
    report["config_hash"] = hex64(chain.config_hash);
    report["dataset_fingerprint"] = hex64(chain.dataset_fingerprint);
    report["draws"] = chain.draws.size();
    report["ducks"] = {{"observed_total", duck.observed_total},
                       {"predictive_low", duck.predictive_low},
                       {"predictive_high", duck.predictive_high},
                       {"slope", nullable(duck.slope)},
                       {"calibration", calib_json(duck.calibration)}};
    report["score_bins"] = json::array();
    for (const auto& b : runs) {
        report["score_bins"].push_back(
            {{"bin", b.bin.label()}, {"slope", nullable(b.slope)}, {"calibration", calib_json(b.rows)}});
    }
    write_text(fs::path(o.out) / "ppc.json", report.dump(2) + "\n");

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "ducks: observed %zu, predictive 95%% interval [%.0f, %.0f], calibration slope %.3f\n",
                  duck.observed_total, duck.predictive_low, duck.predictive_high, duck.slope);
    std::cout << "config hash: " << hex64(chain.config_hash) << '\n' << buf;
    for (const auto& b : runs) {
        std::snprintf(buf, sizeof buf, "  runs %-6s slope %.3f\n", b.bin.label().c_str(), b.slope);
        std::cout << buf;
    }
    return 0;
}

// ---- simulate -----------------------------------------------------------------

json truth_json(const SimResult& r) {
    const auto& t = r.truth;
    return {{"player_ids", r.dataset.player_ids},
            {"opposition_labels", r.dataset.opposition_labels},
            {"first_year", r.dataset.first_year},
            {"theta", t.theta},
            {"delta", t.delta},
            {"sigma2_delta", t.sigma2_delta},
            {"alpha1", t.alpha1},
            {"alpha2", t.alpha2},
            {"zeta2", t.zeta2},
            {"nu", t.nu},
            {"xi", t.xi},
            {"omega", t.omega},
            {"eta", t.eta},
            {"pi", t.pi},
            {"mu_theta", t.mu_theta},
            {"sigma2_theta", t.sigma2_theta}};
}

int cmd_simulate(const SimulateOptions& o) {
    ScenarioSpec spec;
    try {
        spec = o.scenario.empty() ? default_scenario() : load_scenario(o.scenario);
        if (o.seed) spec.seed = *o.seed;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const SimResult r = simulate_dataset(make_scenario(spec));
    write_csv(r.dataset, o.out);
    if (!o.truth.empty()) write_text(o.truth, truth_json(r).dump(2) + "\n");

    std::size_t ducks = 0;
    std::size_t not_outs = 0;
    for (const auto& rec : r.dataset.records) {
        ducks += rec.duck;
        not_outs += rec.not_out;
    }
    std::cout << "simulated " << r.dataset.records.size() << " innings for " << r.dataset.dims.players
              << " players over " << r.dataset.dims.years << " years (" << r.dataset.first_year << "-"
              << r.dataset.last_year() << "), " << r.dataset.dims.oppositions << " oppositions; " << ducks
              << " ducks, " << not_outs << " not outs; seed " << spec.seed << '\n';
    return 0;
}

// Finds --config in argv without a full parse, so that required options may
// come from the file.
std::optional<std::string> find_config(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
    Options opts;
    CLI::App app{"Bayesian ranking of batting careers"};
    add_options(app, opts);
    try {
        const auto config = find_config(argc, argv);
        if (config && argc >= 2) {
            // File settings go first so that later command-line flags override them.
            std::vector<std::string> args{argv[1]};
            for (auto& t : config_tokens(*config)) args.push_back(std::move(t));
            for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
            std::reverse(args.begin(), args.end());
            app.parse(args);
        } else {
            app.parse(argc, argv);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "fit") return cmd_fit(opts.fit);
        if (cmd == "summarize") return cmd_summarize(opts.summarize);
        if (cmd == "ppc") return cmd_ppc(opts.ppc);
        if (cmd == "simulate") return cmd_simulate(opts.simulate);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ChainIoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitInput;
}
