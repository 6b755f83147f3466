// Throwaway bring-up probe #4: exchange error timeline + linear model path.
#include <cstdio>

#include "redgrid/bench.hpp"
#include "redgrid/system_io.hpp"

using namespace redgrid;

int main() {
    const auto sys = load_system(REDGRID_DATA_DIR "/two_area.json");
    const auto& part = *sys.partition;
    const auto fault = load_fault(REDGRID_DATA_DIR "/fault_two_area.json", 16.0);
    const auto pf = solve_power_flow(sys);
    const auto init = init_dynamic_state(sys, pf);

    const auto full = integrate_full(sys, init, pf, fault, 16.0, 0.01);
    const auto partf = integrate_partitioned_full(sys, part, init, pf, fault, 16.0, 0.01);

    auto max_delta_err = [&](const SimResult& a, const SimResult& b, Eigen::Index row) {
        double m = 0.0;
        for (std::size_t g = 0; g < sys.machines.size(); ++g) {
            const auto col = static_cast<Eigen::Index>(g) * kSlotsPerGen;
            m = std::max(m, std::abs(a.states(row, col) - b.states(row, col)));
        }
        return m;
    };
    std::printf("partitioned-full vs monolithic |ddelta| timeline:\n");
    for (double t : {0.4, 0.5, 0.6, 0.7, 0.8, 0.89, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0}) {
        const auto row = static_cast<Eigen::Index>(std::llround(t / 0.01));
        std::printf("  t=%5.2f err=%.3e\n", t, max_delta_err(full, partf, row));
    }

    // Pure-linear external model, no truncation: simulate the external area
    // alone against frozen equilibrium inputs; spectrum said stable, so any
    // blowup is in the co-sim coupling.
    const auto cache = build_modal_cache(sys, part, init, pf);
    auto model = ReducedExternalModel::linear(cache.lin, false);
    const auto ctx = ExternalContext::build(sys, part, init, pf);
    Vec s = Vec::Zero(model.state_size());
    s(0) = 0.01;  // small rotor-angle deviation
    double h = 0.01;
    double max_s = 0.0;
    for (int k = 0; k < 1600; ++k) {
        const Vec k1 = model.deriv(ctx, s, init.u0);
        const Vec k2 = model.deriv(ctx, s + (h / 2) * k1, init.u0);
        const Vec k3 = model.deriv(ctx, s + (h / 2) * k2, init.u0);
        const Vec k4 = model.deriv(ctx, s + h * k3, init.u0);
        s += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        max_s = std::max(max_s, s.cwiseAbs().maxCoeff());
    }
    std::printf("linear model, frozen inputs, 16 s: max|s|=%.3e end|s|=%.3e\n", max_s,
                s.cwiseAbs().maxCoeff());

    // Now with the co-sim: adaptive linear (no truncation) on the real fault.
    AdaptiveConfig cfg;
    cfg.method = ReductionMethod::Linear;
    cfg.truncate_linear = false;
    ReductionReport rep;
    const auto sim = run_adaptive(sys, fault, cfg, init, pf, &cache, &rep);
    std::printf("adaptive linear(untruncated) timeline |ddelta| vs full:\n");
    for (double t : {0.89, 1.0, 1.2, 1.5, 2.0, 3.0, 5.0}) {
        const auto row = static_cast<Eigen::Index>(std::llround(t / 0.01));
        std::printf("  t=%5.2f err=%.3e\n", t, max_delta_err(full, sim, row));
    }
    return 0;
}
