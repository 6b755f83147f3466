#include "redgrid/power_flow.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace redgrid {

PowerFlowSolution solve_power_flow(const PowerSystem& sys, double tol, int max_iter) {
    const auto n = static_cast<Eigen::Index>(sys.buses.size());
    const CMat Y = build_ybus(sys, all_bus_ids(sys), Snapshot::PreFault, std::nullopt, {});
    const Mat G = Y.real(), B = Y.imag();

    // Scheduled injections: generation minus load. Slack P and PV/slack Q are free.
    Vec p_sched = Vec::Zero(n), q_sched = Vec::Zero(n);
    Eigen::Index slack = -1;
    std::vector<bool> is_pq(sys.buses.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = sys.buses[static_cast<std::size_t>(i)];
        p_sched(i) = -b.p_load;
        q_sched(i) = -b.q_load;
        is_pq[static_cast<std::size_t>(i)] = b.kind == BusKind::PQ;
        if (b.kind == BusKind::Slack) slack = i;
    }
    for (const auto& m : sys.machines) {
        const auto i = static_cast<Eigen::Index>(sys.bus_index(m.bus));
        if (sys.buses[static_cast<std::size_t>(i)].kind == BusKind::PV) p_sched(i) += m.p_gen;
    }

    Vec vm(n), va(n);
    const double slack_ang = sys.buses[static_cast<std::size_t>(slack)].voltage_ang;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = sys.buses[static_cast<std::size_t>(i)];
        vm(i) = b.kind == BusKind::PQ ? 1.0 : b.voltage_mag;
        va(i) = slack_ang;
    }

    std::vector<Eigen::Index> ang_vars, mag_vars;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i == slack) continue;
        ang_vars.push_back(i);
        if (is_pq[static_cast<std::size_t>(i)]) mag_vars.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(ang_vars.size());
    const auto nv = static_cast<Eigen::Index>(mag_vars.size());

    auto injections = [&](Vec& p, Vec& q) {
        p.setZero(n);
        q.setZero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (G(i, j) == 0.0 && B(i, j) == 0.0) continue;
                const double th = va(i) - va(j);
                const double c = std::cos(th), s = std::sin(th);
                p(i) += vm(i) * vm(j) * (G(i, j) * c + B(i, j) * s);
                q(i) += vm(i) * vm(j) * (G(i, j) * s - B(i, j) * c);
            }
        }
    };

    Vec p(n), q(n);
    int iter = 0;
    double max_mis = 0.0;
    for (;; ++iter) {
        injections(p, q);
        Vec mis(na + nv);
        for (Eigen::Index k = 0; k < na; ++k) mis(k) = p_sched(ang_vars[k]) - p(ang_vars[k]);
        for (Eigen::Index k = 0; k < nv; ++k) mis(na + k) = q_sched(mag_vars[k]) - q(mag_vars[k]);
        max_mis = mis.size() > 0 ? mis.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(max_mis)) throw NoConvergence(iter, max_mis);
        if (max_mis <= tol) break;
        if (iter >= max_iter) throw NoConvergence(iter, max_mis);

        Mat J = Mat::Zero(na + nv, na + nv);
        for (Eigen::Index r = 0; r < na; ++r) {
            const Eigen::Index i = ang_vars[r];
            for (Eigen::Index c = 0; c < na; ++c) {
                const Eigen::Index j = ang_vars[c];
                if (i == j) {
                    J(r, c) = -q(i) - B(i, i) * vm(i) * vm(i);
                } else {
                    const double th = va(i) - va(j);
                    J(r, c) = vm(i) * vm(j) * (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
                }
            }
            for (Eigen::Index c = 0; c < nv; ++c) {
                const Eigen::Index j = mag_vars[c];
                if (i == j) {
                    J(r, na + c) = p(i) / vm(i) + G(i, i) * vm(i);
                } else {
                    const double th = va(i) - va(j);
                    J(r, na + c) = vm(i) * (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
                }
            }
        }
        for (Eigen::Index r = 0; r < nv; ++r) {
            const Eigen::Index i = mag_vars[r];
            for (Eigen::Index c = 0; c < na; ++c) {
                const Eigen::Index j = ang_vars[c];
                if (i == j) {
                    J(na + r, c) = p(i) - G(i, i) * vm(i) * vm(i);
                } else {
                    const double th = va(i) - va(j);
                    J(na + r, c) = -vm(i) * vm(j) * (G(i, j) * std::cos(th) + B(i, j) * std::sin(th));
                }
            }
            for (Eigen::Index c = 0; c < nv; ++c) {
                const Eigen::Index j = mag_vars[c];
                if (i == j) {
                    J(na + r, na + c) = q(i) / vm(i) - B(i, i) * vm(i);
                } else {
                    const double th = va(i) - va(j);
                    J(na + r, na + c) = vm(i) * (G(i, j) * std::sin(th) - B(i, j) * std::cos(th));
                }
            }
        }

        Vec dx = Eigen::PartialPivLU<Mat>(J).solve(mis);
        if (!dx.allFinite()) throw NoConvergence(iter, max_mis);
        for (Eigen::Index k = 0; k < na; ++k) va(ang_vars[k]) += dx(k);
        for (Eigen::Index k = 0; k < nv; ++k) vm(mag_vars[k]) += dx(na + k);
    }

    PowerFlowSolution sol;
    sol.v_mag.assign(vm.data(), vm.data() + n);
    sol.v_ang.assign(va.data(), va.data() + n);
    sol.iterations = iter;
    sol.max_mismatch = max_mis;
    injections(p, q);
    for (const auto& m : sys.machines) {
        const auto i = static_cast<Eigen::Index>(sys.bus_index(m.bus));
        sol.p_gen.push_back(p(i) + sys.buses[static_cast<std::size_t>(i)].p_load);
        sol.q_gen.push_back(q(i) + sys.buses[static_cast<std::size_t>(i)].q_load);
    }
    return sol;
}

EquilibriumInit init_dynamic_state(const PowerSystem& sys, const PowerFlowSolution& pf) {
    const auto layout = sys.layout();
    EquilibriumInit out;
    out.x0.resize(static_cast<Eigen::Index>(layout.size()));
    out.exciters = sys.exciters;
    out.governors = sys.governors;

    for (std::size_t g = 0; g < sys.machines.size(); ++g) {
        const auto& m = sys.machines[g];
        const std::size_t bi = sys.bus_index(m.bus);
        const Complex V = std::polar(pf.v_mag[bi], pf.v_ang[bi]);
        const Complex S(pf.p_gen[g], pf.q_gen[g]);
        const Complex I = std::conj(S / V);

        // q-axis direction from the voltage behind (Ra, Xq).
        const Complex E_xq = V + Complex(m.Ra, m.Xq) * I;
        const double delta = std::arg(E_xq);
        const Complex idq = network_to_dq(delta, I);
        const Complex vdq = network_to_dq(delta, V);
        const double Id = idq.real(), Iq = idq.imag();
        const double Vd = vdq.real(), Vq = vdq.imag();

        const double Eqp = Vq + m.Ra * Iq + m.Xd_p * Id;
        const double Edp = Vd + m.Ra * Id - m.Xq_p * Iq;
        const double Efd = Eqp + (m.Xd - m.Xd_p) * Id;

        auto& exc = out.exciters[g];
        const double SE = exc.SE_a * std::exp(exc.SE_b * Efd);
        const double VR = (exc.KE + SE) * Efd;
        if (VR > exc.VR_max || VR < exc.VR_min)
            throw InitInfeasible("machine at bus " + std::to_string(m.bus) + " needs VR = " +
                                 std::to_string(VR) + " outside [" + std::to_string(exc.VR_min) +
                                 ", " + std::to_string(exc.VR_max) + "]");
        const double Rf = (exc.KF / exc.TF) * Efd;
        exc.V_ref = std::abs(V) + VR / exc.KA;

        const double Pe = Edp * Id + Eqp * Iq + (m.Xq_p - m.Xd_p) * Id * Iq;
        auto& gov = out.governors[g];
        if (Pe > gov.P_sv_max || Pe < gov.P_sv_min)
            throw InitInfeasible("machine at bus " + std::to_string(m.bus) + " needs Pgv = " +
                                 std::to_string(Pe) + " outside its governor limits");
        gov.P_ref = Pe;

        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Delta))) = delta;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Pm))) = Pe;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Pgv))) = Pe;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::VR))) = VR;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Rf))) = Rf;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Efd))) = Efd;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Edp))) = Edp;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Eqp))) = Eqp;
        out.x0(static_cast<Eigen::Index>(layout.index_of(g, Slot::Omega))) = kOmegaSync;
    }

    if (sys.partition) {
        out.u0 = equilibrium_boundary(sys, *sys.partition, pf).tie_inputs;
    } else {
        out.u0.resize(0);
    }
    return out;
}

EquilibriumBoundary equilibrium_boundary(const PowerSystem& sys, const Partition& part,
                                         const PowerFlowSolution& pf) {
    EquilibriumBoundary out;
    const auto nb = static_cast<Eigen::Index>(part.boundary_buses.size());
    out.boundary_v.resize(nb);
    out.boundary_i = CVec::Zero(nb);
    out.tie_inputs.resize(2 * static_cast<Eigen::Index>(part.tie_lines.size()));

    auto boundary_pos = [&](int bus_id) {
        for (Eigen::Index k = 0; k < nb; ++k)
            if (part.boundary_buses[static_cast<std::size_t>(k)] == bus_id) return k;
        throw DimensionMismatch("bus is not a boundary bus");
    };

    for (Eigen::Index k = 0; k < nb; ++k) {
        const std::size_t bi = sys.bus_index(part.boundary_buses[static_cast<std::size_t>(k)]);
        out.boundary_v(k) = std::polar(pf.v_mag[bi], pf.v_ang[bi]);
    }

    for (std::size_t t = 0; t < part.tie_lines.size(); ++t) {
        const auto& br = sys.branches[part.tie_lines[t]];
        const bool from_study = is_study_bus(part, br.from_bus);
        const int study_bus = from_study ? br.from_bus : br.to_bus;
        const std::size_t fi = sys.bus_index(br.from_bus);
        const std::size_t ti = sys.bus_index(br.to_bus);
        const Complex Vf = std::polar(pf.v_mag[fi], pf.v_ang[fi]);
        const Complex Vt = std::polar(pf.v_mag[ti], pf.v_ang[ti]);
        const Complex y = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b_charging / 2.0);
        const double a = br.tap_ratio;

        // Current delivered into the study-side endpoint by this tie line.
        Complex into_study;
        if (from_study)
            into_study = (y / a) * Vt - (y / (a * a) + ysh) * Vf;
        else
            into_study = (y / a) * Vf - (y + ysh) * Vt;
        out.boundary_i(boundary_pos(study_bus)) += into_study;

        const std::size_t si = sys.bus_index(study_bus);
        out.tie_inputs(2 * static_cast<Eigen::Index>(t)) = pf.v_ang[si];
        out.tie_inputs(2 * static_cast<Eigen::Index>(t) + 1) = pf.v_mag[si];
    }
    return out;
}

}  // namespace redgrid
