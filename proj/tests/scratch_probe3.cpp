// Throwaway bring-up probe #3: exchange identities at the equilibrium.
#include <cstdio>

#include "redgrid/bench.hpp"
#include "redgrid/system_io.hpp"

using namespace redgrid;

int main() {
    const auto sys = load_system(REDGRID_DATA_DIR "/two_area.json");
    const auto& part = *sys.partition;
    const auto pf = solve_power_flow(sys);
    const auto init = init_dynamic_state(sys, pf);
    const auto eq = equilibrium_boundary(sys, part, pf);

    const auto study = AreaModel::study(sys, part, init);
    const auto ext = AreaModel::external(sys, part, init);
    const auto study_nets = build_study_networks(sys, part, pf, std::nullopt);
    const auto ext_nets = build_external_networks(sys, part, pf);
    const NetworkSolver ssolver(&study_nets.pre, machine_interfaces_subset(sys, study.machine_indices()));
    const NetworkSolver esolver(&ext_nets.pre, machine_interfaces_subset(sys, ext.machine_indices()));

    auto split = [&](const std::vector<std::size_t>& idx) {
        Vec x(static_cast<Eigen::Index>(idx.size()) * kSlotsPerGen);
        for (std::size_t g = 0; g < idx.size(); ++g)
            x.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
                init.x0.segment(static_cast<Eigen::Index>(idx[g]) * kSlotsPerGen, kSlotsPerGen);
        return x;
    };
    const Vec x_s = split(study.machine_indices());
    const Vec x_e = split(ext.machine_indices());

    std::printf("u0 (theta,V per tie): ");
    for (Eigen::Index i = 0; i < init.u0.size(); ++i) std::printf("%.6f ", init.u0(i));
    std::printf("\n");
    std::printf("eq.boundary_v = %.6f %+.6fj\n", eq.boundary_v(0).real(), eq.boundary_v(0).imag());
    std::printf("eq.boundary_i (into study) = %.6f %+.6fj\n", eq.boundary_i(0).real(),
                eq.boundary_i(0).imag());

    const CVec ib_pub = ext.publish_boundary_currents(esolver, x_e, init.u0);
    std::printf("ext publish ib = %.6f %+.6fj  (err vs eq: %.3e)\n", ib_pub(0).real(),
                ib_pub(0).imag(), std::abs(ib_pub(0) - eq.boundary_i(0)));

    const CVec vb_pub = study.publish_boundary_voltages(ssolver, x_s, eq.boundary_i);
    std::printf("study publish vb = %.6f %+.6fj  (err vs eq: %.3e)\n", vb_pub(0).real(),
                vb_pub(0).imag(), std::abs(vb_pub(0) - eq.boundary_v(0)));

    const Vec fe = ext.rhs_external(esolver, x_e, init.u0);
    const Vec fs = study.rhs_study(ssolver, x_s, eq.boundary_i);
    std::printf("||f_ext||=%.3e  ||f_study||=%.3e\n", fe.cwiseAbs().maxCoeff(),
                fs.cwiseAbs().maxCoeff());

    // March the no-fault partitioned run briefly and watch the drift grow.
    const auto res = integrate_partitioned_full(sys, part, init, pf, std::nullopt, 1.0, 0.01);
    for (Eigen::Index k : {1, 2, 5, 10, 50, 100}) {
        const double d = (res.states.row(k).transpose() - init.x0).cwiseAbs().maxCoeff();
        std::printf("t=%.2f drift=%.3e\n", res.times(k), d);
    }
    return 0;
}
