// Throwaway numerical probe used during bring-up; not part of the test suite.
#include <cstdio>

#include "redgrid/adaptive.hpp"
#include "redgrid/bench.hpp"
#include "redgrid/system_io.hpp"

using namespace redgrid;

static void probe(const char* path, const char* name) {
    std::printf("=== %s ===\n", name);
    const auto sys = load_system(path);
    const auto pf = solve_power_flow(sys);
    std::printf("pf: iters=%d mismatch=%.3e\n", pf.iterations, pf.max_mismatch);
    for (std::size_t i = 0; i < sys.buses.size(); ++i)
        std::printf("  bus %d: V=%.4f ang=%.4f deg\n", sys.buses[i].id, pf.v_mag[i],
                    pf.v_ang[i] * 180.0 / M_PI);
    for (std::size_t g = 0; g < sys.machines.size(); ++g)
        std::printf("  gen@%d: P=%.4f Q=%.4f\n", sys.machines[g].bus, pf.p_gen[g], pf.q_gen[g]);

    const auto init = init_dynamic_state(sys, pf);
    const auto area = AreaModel::monolithic(sys, init);
    const auto nets = build_monolithic_networks(sys, pf, std::nullopt);
    const NetworkSolver solver(&nets.pre, machine_interfaces(sys));
    const Vec f0 = area.rhs(solver, init.x0);
    std::printf("||f(x0)||_inf = %.3e\n", f0.cwiseAbs().maxCoeff());

    const auto lin = linearize_monolithic(area, solver, init.x0, 1e-6);
    const auto modal = eigensolve(lin.A);
    double max_re = -1e9;
    for (Eigen::Index i = 0; i < modal.eigenvalues.size(); ++i) {
        const auto lam = modal.eigenvalues(i);
        if (std::abs(lam) < 1e-7) continue;  // reference drift
        max_re = std::max(max_re, lam.real());
    }
    std::printf("monolithic spectrum: max Re (excl. drift) = %.5f\n", max_re);
    for (Eigen::Index i = 0; i < modal.eigenvalues.size(); ++i) {
        const auto lam = modal.eigenvalues(i);
        if (lam.imag() > 0.01)
            std::printf("  osc mode: %.4f + j%.4f  f=%.4f Hz zeta=%.4f\n", lam.real(), lam.imag(),
                        modal.frequency_hz(i), modal.damping_ratio(i));
    }

    if (sys.partition) {
        const auto cache = build_modal_cache(sys, *sys.partition, init, pf);
        std::printf("external model: %ld states\n", (long)cache.lin.A.rows());
        for (Eigen::Index i = 0; i < cache.modal.eigenvalues.size(); ++i) {
            const auto lam = cache.modal.eigenvalues(i);
            if (lam.imag() > 0.01)
                std::printf("  ext osc: %.4f + j%.4f  f=%.4f Hz zeta=%.4f\n", lam.real(),
                            lam.imag(), cache.modal.frequency_hz(i), cache.modal.damping_ratio(i));
        }
        double ext_max_re = -1e9;
        for (Eigen::Index i = 0; i < cache.modal.eigenvalues.size(); ++i)
            ext_max_re = std::max(ext_max_re, cache.modal.eigenvalues(i).real());
        std::printf("external max Re = %.6f\n", ext_max_re);
    }

    // 10 s equilibrium hold
    const auto hold = integrate_full(sys, init, pf, std::nullopt, 10.0, 0.01);
    double drift = 0.0;
    for (Eigen::Index r = 0; r < hold.states.rows(); ++r)
        drift = std::max(drift,
                         (hold.states.row(r).transpose() - init.x0).cwiseAbs().maxCoeff());
    std::printf("10 s equilibrium drift = %.3e (wall %.3f s)\n", drift, hold.wall_seconds);
}

int main() {
    probe(REDGRID_DATA_DIR "/ieee9.json", "ieee9");
    probe(REDGRID_DATA_DIR "/two_area.json", "two_area");
    return 0;
}
