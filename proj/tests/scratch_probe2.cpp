// Throwaway bring-up probe #2: fault response, exchange contract, adaptive runs.
#include <cstdio>

#include "redgrid/bench.hpp"
#include "redgrid/system_io.hpp"

using namespace redgrid;

int main() {
    const auto sys = load_system(REDGRID_DATA_DIR "/two_area.json");
    const auto fault = load_fault(REDGRID_DATA_DIR "/fault_two_area.json", 16.0);
    const auto pf = solve_power_flow(sys);
    const auto init = init_dynamic_state(sys, pf);

    // Full monolithic run of the featured contingency.
    const auto full = integrate_full(sys, init, pf, fault, 16.0, 0.01);
    double max_dev = 0.0, end_dev = 0.0;
    for (std::size_t g = 0; g < sys.machines.size(); ++g) {
        const auto col = static_cast<Eigen::Index>(g) * kSlotsPerGen;
        const Vec rel = full.states.col(col) - full.states.col(0);  // vs gen 0
        max_dev = std::max(max_dev, (rel.array() - rel(0)).abs().maxCoeff());
        end_dev = std::max(end_dev, std::abs(rel(rel.size() - 1) - rel(0)));
    }
    std::printf("full: wall=%.3f s, max rel-angle dev=%.3f rad, end dev=%.3f rad\n",
                full.wall_seconds, max_dev, end_dev);

    // Exchange contract: partitioned-full vs monolithic.
    const auto part_full =
        integrate_partitioned_full(sys, *sys.partition, init, pf, fault, 16.0, 0.01);
    double contract_err = 0.0;
    for (std::size_t g = 0; g < sys.machines.size(); ++g) {
        const auto col = static_cast<Eigen::Index>(g) * kSlotsPerGen;
        contract_err = std::max(contract_err,
                                (part_full.states.col(col) - full.states.col(col)).cwiseAbs().maxCoeff());
    }
    std::printf("partitioned-full vs monolithic: max |delta| err = %.3e rad (wall %.3f)\n",
                contract_err, part_full.wall_seconds);

    // Adaptive methods.
    const auto cache = build_modal_cache(sys, *sys.partition, init, pf);
    for (auto m : {ReductionMethod::PF, ReductionMethod::Rotor, ReductionMethod::Linear}) {
        AdaptiveConfig cfg;
        cfg.method = m;
        ReductionReport rep;
        const auto sim = run_adaptive(sys, fault, cfg, init, pf, &cache, &rep);
        const auto ref = pick_reference_generator(sys, full);
        const auto col = static_cast<Eigen::Index>(ref) * kSlotsPerGen;
        const double err =
            rmse(Vec(full.states.col(col) * 180.0 / M_PI), Vec(sim.states.col(col) * 180.0 / M_PI));
        std::printf("%-6s: RMSE(delta ref gen@%d) = %.4f deg, wall=%.4f s, N={",
                    method_name(m), sys.machines[ref].bus, err, sim.wall_seconds);
        for (int b : rep.nonlinear_buses) std::printf(" %d", b);
        std::printf(" }, ext states=%ld, switch_failed=%d\n", (long)rep.external_model_states,
                    rep.switch_failed ? 1 : 0);
        for (const auto& d : rep.dominant)
            std::printf("        dominant: f=%.4f Hz zeta=%.4f Z=%.3e\n", d.frequency_hz,
                        d.damping_ratio, d.excitation);
    }
    return 0;
}
