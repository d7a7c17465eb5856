// Serial vs OpenMP timings for the hot kernels.
//
//   bench [players] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include <omp.h>

#include "batrank/analysis.hpp"
#include "batrank/model.hpp"
#include "batrank/sampler.hpp"
#include "batrank/simulate.hpp"

using namespace batrank;

namespace {

double best_of(int repeats, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-22s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  %s\n", name, 1e3 * serial, 1e3 * parallel,
                serial / parallel, same ? "identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t players = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 300;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

    ScenarioSpec spec = default_scenario();
    spec.players = players;
    spec.years = 40;
    spec.seed = 11;
    const SimResult sim = simulate_dataset(make_scenario(spec));
    std::printf("%zu players, %zu innings, %d threads\n", players, sim.dataset.records.size(), omp_get_max_threads());

    double a = 0.0, b = 0.0;
    const double tl_s = best_of(repeats, [&] { a = total_log_lik(sim.truth, sim.dataset); });
    const double tl_p = best_of(repeats, [&] { b = total_log_lik_parallel(sim.truth, sim.dataset); });
    report("total_log_lik", tl_s, tl_p, a == b);

    ChainConfig cfg;
    cfg.n_iter = 60;
    cfg.burn_in = 0;
    cfg.thin = 1;
    ChainOutput cs, cp;
    cfg.exec = Exec::serial;
    const double it_s = best_of(repeats, [&] { cs = run_chain(sim.dataset, PriorConfig{}, cfg); });
    cfg.exec = Exec::parallel;
    const double it_p = best_of(repeats, [&] { cp = run_chain(sim.dataset, PriorConfig{}, cfg); });
    bool same = cs.draws.size() == cp.draws.size();
    for (std::size_t k = 0; same && k < cs.draws.size(); ++k) same = cs.draws[k].flatten() == cp.draws[k].flatten();
    report("sampler, 60 iters", it_s, it_p, same);

    DuckPpc ps, pp;
    const double pc_s = best_of(repeats, [&] { ps = ppc_duck(cp, sim.dataset, 1, 100, Exec::serial); });
    const double pc_p = best_of(repeats, [&] { pp = ppc_duck(cp, sim.dataset, 1, 100, Exec::parallel); });
    report("ppc_duck, 60 draws", pc_s, pc_p,
           ps.probability == pp.probability && ps.predictive_totals == pp.predictive_totals);

    std::vector<RankSummary> rs, rp;
    const double rk_s = best_of(repeats, [&] { rs = rank_table(cp, 0, Exec::serial); });
    const double rk_p = best_of(repeats, [&] { rp = rank_table(cp, 0, Exec::parallel); });
    bool ranks_same = rs.size() == rp.size();
    for (std::size_t k = 0; ranks_same && k < rs.size(); ++k)
        ranks_same = rs[k].player_id == rp[k].player_id && rs[k].median_rank == rp[k].median_rank;
    report("rank_table", rk_s, rk_p, ranks_same);
    return 0;
}
