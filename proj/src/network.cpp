#include "redgrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

namespace redgrid {

namespace {

std::map<int, Eigen::Index> position_map(const std::vector<int>& bus_ids) {
    std::map<int, Eigen::Index> pos;
    for (std::size_t i = 0; i < bus_ids.size(); ++i) pos[bus_ids[i]] = static_cast<Eigen::Index>(i);
    return pos;
}

void stamp_branch(CMat& Y, Eigen::Index f, Eigen::Index t, const Branch& br) {
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b_charging / 2.0);
    const double a = br.tap_ratio;
    Y(f, f) += y / (a * a) + ysh;
    Y(t, t) += y + ysh;
    Y(f, t) -= y / a;
    Y(t, f) -= y / a;
}

}  // namespace

std::vector<int> all_bus_ids(const PowerSystem& sys) {
    std::vector<int> ids;
    ids.reserve(sys.buses.size());
    for (const auto& b : sys.buses) ids.push_back(b.id);
    return ids;
}

std::vector<int> study_bus_ids(const PowerSystem& sys, const Partition& part) {
    (void)sys;
    return part.study_buses;
}

std::vector<int> external_bus_ids(const PowerSystem& sys, const Partition& part) {
    std::vector<int> ids;
    for (const auto& b : sys.buses)
        if (!is_study_bus(part, b.id)) ids.push_back(b.id);
    return ids;
}

std::vector<std::size_t> study_machines(const PowerSystem& sys, const Partition& part) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sys.machines.size(); ++i)
        if (is_study_bus(part, sys.machines[i].bus)) idx.push_back(i);
    return idx;
}

std::vector<std::size_t> external_machines(const PowerSystem& sys, const Partition& part) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sys.machines.size(); ++i)
        if (!is_study_bus(part, sys.machines[i].bus)) idx.push_back(i);
    return idx;
}

CMat build_ybus(const PowerSystem& sys, const std::vector<int>& bus_ids, Snapshot snapshot,
                const std::optional<FaultSpec>& fault, const std::vector<double>& load_voltage) {
    const auto pos = position_map(bus_ids);
    const auto n = static_cast<Eigen::Index>(bus_ids.size());
    CMat Y = CMat::Zero(n, n);

    for (const auto& br : sys.branches) {
        if (br.status != BranchStatus::In) continue;
        auto fi = pos.find(br.from_bus);
        auto ti = pos.find(br.to_bus);
        if (fi == pos.end() || ti == pos.end()) continue;
        stamp_branch(Y, fi->second, ti->second, br);
    }

    for (const auto& b : sys.buses) {
        auto it = pos.find(b.id);
        if (it == pos.end()) continue;
        Y(it->second, it->second) += Complex(b.shunt_g, b.shunt_b);
        if (!load_voltage.empty()) {
            const double v = load_voltage[sys.bus_index(b.id)];
            Y(it->second, it->second) += Complex(b.p_load, -b.q_load) / (v * v);
        }
    }

    if (snapshot == Snapshot::OnFault) {
        if (!fault) throw DimensionMismatch("on-fault snapshot requires a fault spec");
        auto it = pos.find(fault->bus);
        if (it == pos.end())
            throw ValidationError("fault.bus", "faulted bus " + std::to_string(fault->bus) +
                                                   " is not part of this subnetwork");
        Y(it->second, it->second) += Complex(kFaultConductance, 0.0);
    }
    return Y;
}

CMat kron_reduce(const CMat& Y, const std::vector<Eigen::Index>& retained) {
    const Eigen::Index n = Y.rows();
    std::vector<bool> keep(static_cast<std::size_t>(n), false);
    for (auto r : retained) keep[static_cast<std::size_t>(r)] = true;
    std::vector<Eigen::Index> eliminated;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!keep[static_cast<std::size_t>(i)]) eliminated.push_back(i);

    if (eliminated.empty()) {
        CMat out(retained.size(), retained.size());
        for (std::size_t i = 0; i < retained.size(); ++i)
            for (std::size_t j = 0; j < retained.size(); ++j) out(i, j) = Y(retained[i], retained[j]);
        return out;
    }

    const auto nr = static_cast<Eigen::Index>(retained.size());
    const auto ne = static_cast<Eigen::Index>(eliminated.size());
    CMat Yrr(nr, nr), Yre(nr, ne), Yer(ne, nr), Yee(ne, ne);
    for (Eigen::Index i = 0; i < nr; ++i) {
        for (Eigen::Index j = 0; j < nr; ++j) Yrr(i, j) = Y(retained[i], retained[j]);
        for (Eigen::Index j = 0; j < ne; ++j) Yre(i, j) = Y(retained[i], eliminated[j]);
    }
    for (Eigen::Index i = 0; i < ne; ++i) {
        for (Eigen::Index j = 0; j < nr; ++j) Yer(i, j) = Y(eliminated[i], retained[j]);
        for (Eigen::Index j = 0; j < ne; ++j) Yee(i, j) = Y(eliminated[i], eliminated[j]);
    }

    Eigen::FullPivLU<CMat> lu(Yee);
    if (!lu.isInvertible()) throw SingularBlock("eliminated admittance block is not invertible");
    return Yrr - Yre * lu.solve(Yer);
}

namespace {

/// Shared assembly: bus-level network plus machine internal nodes, reduced to
/// machine internals (in `machine_idx` order) followed by `boundary` buses.
ReducedNetwork reduce_to_internals(const PowerSystem& sys, const std::vector<int>& bus_ids,
                                   CMat Ybus, const std::vector<std::size_t>& machine_idx,
                                   const std::vector<int>& boundary, Snapshot snapshot) {
    const auto pos = position_map(bus_ids);
    const auto nb = static_cast<Eigen::Index>(bus_ids.size());
    const auto nm = static_cast<Eigen::Index>(machine_idx.size());

    CMat Y = CMat::Zero(nb + nm, nb + nm);
    Y.topLeftCorner(nb, nb) = Ybus;
    for (Eigen::Index k = 0; k < nm; ++k) {
        const auto& m = sys.machines[machine_idx[static_cast<std::size_t>(k)]];
        const Complex ym = 1.0 / Complex(m.Ra, m.Xd_p);
        const Eigen::Index bus = pos.at(m.bus);
        const Eigen::Index internal = nb + k;
        Y(bus, bus) += ym;
        Y(internal, internal) += ym;
        Y(bus, internal) -= ym;
        Y(internal, bus) -= ym;
    }

    std::vector<Eigen::Index> retained;
    for (Eigen::Index k = 0; k < nm; ++k) retained.push_back(nb + k);
    for (int b : boundary) retained.push_back(pos.at(b));

    ReducedNetwork net;
    net.Y = kron_reduce(Y, retained);
    net.n_machine = static_cast<std::size_t>(nm);
    net.n_boundary = boundary.size();
    net.snapshot = snapshot;
    return net;
}

}  // namespace

ReducedNetwork build_monolithic_network(const PowerSystem& sys, Snapshot snapshot,
                                        const std::optional<FaultSpec>& fault,
                                        const std::vector<double>& load_voltage) {
    const auto ids = all_bus_ids(sys);
    CMat Ybus = build_ybus(sys, ids, snapshot, fault, load_voltage);
    std::vector<std::size_t> all_machines(sys.machines.size());
    for (std::size_t i = 0; i < all_machines.size(); ++i) all_machines[i] = i;
    return reduce_to_internals(sys, ids, std::move(Ybus), all_machines, {}, snapshot);
}

ReducedNetwork build_study_network(const PowerSystem& sys, const Partition& part, Snapshot snapshot,
                                   const std::optional<FaultSpec>& fault,
                                   const std::vector<double>& load_voltage) {
    const auto ids = study_bus_ids(sys, part);
    CMat Ybus = build_ybus(sys, ids, snapshot, fault, load_voltage);
    return reduce_to_internals(sys, ids, std::move(Ybus), study_machines(sys, part),
                               part.boundary_buses, snapshot);
}

ReducedNetwork build_external_network(const PowerSystem& sys, const Partition& part,
                                      const std::vector<double>& load_voltage) {
    // Nodes: external buses plus the boundary buses, which appear only as
    // ideal voltage-source terminals (their own loads/shunts stay with the
    // study area). Branches: external-internal ones plus the tie lines.
    auto ids = external_bus_ids(sys, part);
    const std::size_t n_ext = ids.size();
    ids.insert(ids.end(), part.boundary_buses.begin(), part.boundary_buses.end());
    const auto pos = position_map(ids);
    const auto n = static_cast<Eigen::Index>(ids.size());

    CMat Y = CMat::Zero(n, n);
    std::vector<bool> is_tie(sys.branches.size(), false);
    for (std::size_t idx : part.tie_lines) is_tie[idx] = true;
    for (std::size_t i = 0; i < sys.branches.size(); ++i) {
        const auto& br = sys.branches[i];
        if (br.status != BranchStatus::In) continue;
        const bool from_ext = !is_study_bus(part, br.from_bus);
        const bool to_ext = !is_study_bus(part, br.to_bus);
        if ((from_ext && to_ext) || is_tie[i])
            stamp_branch(Y, pos.at(br.from_bus), pos.at(br.to_bus), br);
    }
    for (const auto& b : sys.buses) {
        if (is_study_bus(part, b.id)) continue;
        const Eigen::Index k = pos.at(b.id);
        Y(k, k) += Complex(b.shunt_g, b.shunt_b);
        if (!load_voltage.empty()) {
            const double v = load_voltage[sys.bus_index(b.id)];
            Y(k, k) += Complex(b.p_load, -b.q_load) / (v * v);
        }
    }
    (void)n_ext;
    return reduce_to_internals(sys, ids, std::move(Y), external_machines(sys, part),
                               part.boundary_buses, Snapshot::PreFault);
}

CMat boundary_block(const ReducedNetwork& net) {
    const auto nb = static_cast<Eigen::Index>(net.n_boundary);
    return net.Y.bottomRightCorner(nb, nb);
}

void add_boundary_admittance(ReducedNetwork& net, const CMat& Yb) {
    const auto nb = static_cast<Eigen::Index>(net.n_boundary);
    if (Yb.rows() != nb || Yb.cols() != nb)
        throw DimensionMismatch("boundary admittance block size mismatch");
    net.Y.bottomRightCorner(nb, nb) += Yb;
}

BusVoltageSolver::BusVoltageSolver(const PowerSystem& sys, Snapshot snapshot,
                                   const std::optional<FaultSpec>& fault,
                                   const std::vector<double>& load_voltage) {
    const auto ids = all_bus_ids(sys);
    const auto nb = static_cast<Eigen::Index>(ids.size());
    const auto nm = static_cast<Eigen::Index>(sys.machines.size());
    CMat Ybb = build_ybus(sys, ids, snapshot, fault, load_voltage);
    Ybi_ = CMat::Zero(nb, nm);
    for (Eigen::Index k = 0; k < nm; ++k) {
        const auto& m = sys.machines[static_cast<std::size_t>(k)];
        const Complex ym = 1.0 / Complex(m.Ra, m.Xd_p);
        const auto bus = static_cast<Eigen::Index>(sys.bus_index(m.bus));
        Ybb(bus, bus) += ym;
        Ybi_(bus, k) = -ym;
    }
    lu_.compute(Ybb);
}

CVec BusVoltageSolver::solve(const CVec& machine_E_eff) const {
    // Zero-injection bus equations: Ybb V + Ybi E = 0.
    return lu_.solve((-Ybi_ * machine_E_eff).eval());
}

std::vector<MachineInterface> machine_interfaces(const PowerSystem& sys) {
    std::vector<MachineInterface> out;
    out.reserve(sys.machines.size());
    for (const auto& m : sys.machines)
        out.push_back({m.Ra, m.Xd_p, m.Xq_p, m.Xq_p - m.Xd_p});
    return out;
}

std::vector<MachineInterface> machine_interfaces_subset(const PowerSystem& sys,
                                                        const std::vector<std::size_t>& machine_idx) {
    std::vector<MachineInterface> out;
    out.reserve(machine_idx.size());
    for (std::size_t i : machine_idx) {
        const auto& m = sys.machines[i];
        out.push_back({m.Ra, m.Xd_p, m.Xq_p, m.Xq_p - m.Xd_p});
    }
    return out;
}

NetworkSolver::NetworkSolver(const ReducedNetwork* net, std::vector<MachineInterface> machines)
    : net_(net), machines_(std::move(machines)) {
    if (machines_.size() != net_->n_machine)
        throw DimensionMismatch("machine interface count does not match network");
}

namespace {

// Saliency correction map: I (network frame) -> correction EMF, as a real
// 2x2 block sal * [cos g; sin g] * [-sin g, cos g].
inline Eigen::Matrix2d saliency_block(double sal, double gamma) {
    const double c = std::cos(gamma), s = std::sin(gamma);
    Eigen::Matrix2d M;
    M << -sal * c * s, sal * c * c, -sal * s * s, sal * s * c;
    return M;
}

}  // namespace

MachineCurrents NetworkSolver::solve_with_boundary_voltages(const std::vector<MachineEmf>& emf,
                                                            const CVec& boundary_v,
                                                            CVec* boundary_currents) const {
    const auto nm = static_cast<Eigen::Index>(net_->n_machine);
    const auto nb = static_cast<Eigen::Index>(net_->n_boundary);
    if (static_cast<Eigen::Index>(emf.size()) != nm)
        throw DimensionMismatch("EMF count does not match machine count");
    if (boundary_v.size() != nb) throw DimensionMismatch("boundary voltage count mismatch");

    // Source EMFs (before saliency correction) in network coordinates.
    CVec e(nm);
    for (Eigen::Index k = 0; k < nm; ++k)
        e(k) = dq_to_network(emf[static_cast<std::size_t>(k)].delta,
                             Complex(emf[static_cast<std::size_t>(k)].Edp,
                                     emf[static_cast<std::size_t>(k)].Eqp));

    // rhs_c = Y_mm e + Y_mb V_b
    CVec rhs_c = net_->Y.topLeftCorner(nm, nm) * e;
    if (nb > 0) rhs_c += net_->Y.topRightCorner(nm, nb) * boundary_v;

    // (I - Y_mm M) I = rhs, real-embedded to keep the correction exact.
    Mat S = Mat::Identity(2 * nm, 2 * nm);
    for (Eigen::Index j = 0; j < nm; ++j) {
        const auto& mj = machines_[static_cast<std::size_t>(j)];
        if (mj.sal == 0.0) continue;
        const Eigen::Matrix2d Mj =
            saliency_block(mj.sal, emf[static_cast<std::size_t>(j)].delta - M_PI / 2.0);
        for (Eigen::Index i = 0; i < nm; ++i) {
            const Complex y = net_->Y(i, j);
            Eigen::Matrix2d Yij;
            Yij << y.real(), -y.imag(), y.imag(), y.real();
            S.block<2, 2>(2 * i, 2 * j) -= Yij * Mj;
        }
    }
    Vec rhs(2 * nm);
    for (Eigen::Index k = 0; k < nm; ++k) {
        rhs(2 * k) = rhs_c(k).real();
        rhs(2 * k + 1) = rhs_c(k).imag();
    }
    Eigen::PartialPivLU<Mat> lu(S);
    Vec sol = lu.solve(rhs);
    if (!sol.allFinite()) throw SingularNetwork("machine current solve produced non-finite values");

    MachineCurrents out;
    out.Id.resize(nm);
    out.Iq.resize(nm);
    out.Vt.resize(nm);
    out.I_net.resize(nm);
    out.E_eff.resize(nm);
    for (Eigen::Index k = 0; k < nm; ++k) {
        const Complex I(sol(2 * k), sol(2 * k + 1));
        const auto& mk = machines_[static_cast<std::size_t>(k)];
        const double delta = emf[static_cast<std::size_t>(k)].delta;
        const Complex idq = network_to_dq(delta, I);
        out.I_net(k) = I;
        out.Id(k) = idq.real();
        out.Iq(k) = idq.imag();
        out.E_eff(k) = e(k) + dq_to_network(delta, Complex(mk.sal * idq.imag(), 0.0));
        out.Vt(k) = std::abs(out.E_eff(k) - Complex(mk.Ra, mk.Xd_p) * I);
    }
    if (boundary_currents && nb > 0) {
        *boundary_currents = net_->Y.bottomLeftCorner(nb, nm) * out.E_eff +
                             net_->Y.bottomRightCorner(nb, nb) * boundary_v;
    }
    return out;
}

MachineCurrents NetworkSolver::solve_with_boundary_currents(const std::vector<MachineEmf>& emf,
                                                            const CVec& boundary_i,
                                                            CVec* boundary_voltages) const {
    const auto nm = static_cast<Eigen::Index>(net_->n_machine);
    const auto nb = static_cast<Eigen::Index>(net_->n_boundary);
    if (static_cast<Eigen::Index>(emf.size()) != nm)
        throw DimensionMismatch("EMF count does not match machine count");
    if (boundary_i.size() != nb) throw DimensionMismatch("boundary current count mismatch");

    CVec e(nm);
    for (Eigen::Index k = 0; k < nm; ++k)
        e(k) = dq_to_network(emf[static_cast<std::size_t>(k)].delta,
                             Complex(emf[static_cast<std::size_t>(k)].Edp,
                                     emf[static_cast<std::size_t>(k)].Eqp));

    // Unknowns: machine currents I_m, boundary voltages V_b.
    //   (I - Y_mm M) I_m - Y_mb V_b = Y_mm e
    //   Y_bm M I_m    + Y_bb V_b   = I_b - Y_bm e
    const Eigen::Index dim = 2 * (nm + nb);
    Mat S = Mat::Zero(dim, dim);
    S.topLeftCorner(2 * nm, 2 * nm).setIdentity();
    Vec rhs(dim);

    std::vector<Eigen::Matrix2d> Mblk(static_cast<std::size_t>(nm), Eigen::Matrix2d::Zero());
    for (Eigen::Index j = 0; j < nm; ++j) {
        const auto& mj = machines_[static_cast<std::size_t>(j)];
        if (mj.sal != 0.0)
            Mblk[static_cast<std::size_t>(j)] =
                saliency_block(mj.sal, emf[static_cast<std::size_t>(j)].delta - M_PI / 2.0);
    }
    for (Eigen::Index i = 0; i < nm + nb; ++i) {
        for (Eigen::Index j = 0; j < nm; ++j) {
            const Complex y = net_->Y(i, j);
            Eigen::Matrix2d Yij;
            Yij << y.real(), -y.imag(), y.imag(), y.real();
            const Eigen::Matrix2d prod = Yij * Mblk[static_cast<std::size_t>(j)];
            if (i < nm)
                S.block<2, 2>(2 * i, 2 * j) -= prod;
            else
                S.block<2, 2>(2 * i, 2 * j) = prod;
        }
        for (Eigen::Index j = 0; j < nb; ++j) {
            const Complex y = net_->Y(i, nm + j);
            Eigen::Matrix2d Yij;
            Yij << y.real(), -y.imag(), y.imag(), y.real();
            if (i < nm)
                S.block<2, 2>(2 * i, 2 * (nm + j)) = -Yij;
            else
                S.block<2, 2>(2 * i, 2 * (nm + j)) = Yij;
        }
    }
    CVec ym_e = net_->Y.leftCols(nm) * e;  // length nm+nb
    for (Eigen::Index i = 0; i < nm; ++i) {
        rhs(2 * i) = ym_e(i).real();
        rhs(2 * i + 1) = ym_e(i).imag();
    }
    for (Eigen::Index i = 0; i < nb; ++i) {
        const Complex v = boundary_i(i) - ym_e(nm + i);
        rhs(2 * (nm + i)) = v.real();
        rhs(2 * (nm + i) + 1) = v.imag();
    }

    Eigen::PartialPivLU<Mat> lu(S);
    Vec sol = lu.solve(rhs);
    if (!sol.allFinite()) throw SingularNetwork("study-area network solve produced non-finite values");

    MachineCurrents out;
    out.Id.resize(nm);
    out.Iq.resize(nm);
    out.Vt.resize(nm);
    out.I_net.resize(nm);
    out.E_eff.resize(nm);
    for (Eigen::Index k = 0; k < nm; ++k) {
        const Complex I(sol(2 * k), sol(2 * k + 1));
        const auto& mk = machines_[static_cast<std::size_t>(k)];
        const double delta = emf[static_cast<std::size_t>(k)].delta;
        const Complex idq = network_to_dq(delta, I);
        out.I_net(k) = I;
        out.Id(k) = idq.real();
        out.Iq(k) = idq.imag();
        out.E_eff(k) = e(k) + dq_to_network(delta, Complex(mk.sal * idq.imag(), 0.0));
        out.Vt(k) = std::abs(out.E_eff(k) - Complex(mk.Ra, mk.Xd_p) * I);
    }
    if (boundary_voltages) {
        boundary_voltages->resize(nb);
        for (Eigen::Index k = 0; k < nb; ++k)
            (*boundary_voltages)(k) = Complex(sol(2 * (nm + k)), sol(2 * (nm + k) + 1));
    }
    return out;
}

MachineCurrents NetworkSolver::solve_partial(const std::vector<MachineEmf>& emf, const CVec& boundary_v,
                                             const std::vector<std::size_t>& exact, const Vec& iq_frozen,
                                             CVec* boundary_currents) const {
    const auto nm = static_cast<Eigen::Index>(net_->n_machine);
    const auto nb = static_cast<Eigen::Index>(net_->n_boundary);
    if (static_cast<Eigen::Index>(emf.size()) != nm)
        throw DimensionMismatch("EMF count does not match machine count");

    // Effective EMFs: frozen machines carry their equilibrium correction
    // current rotated with the present angle; exact machines are solved.
    CVec E_eff(nm);
    std::vector<bool> is_exact(static_cast<std::size_t>(nm), false);
    for (std::size_t k : exact) is_exact[k] = true;
    for (Eigen::Index k = 0; k < nm; ++k) {
        const auto& mk = machines_[static_cast<std::size_t>(k)];
        const auto& s = emf[static_cast<std::size_t>(k)];
        Complex corr(0.0, 0.0);
        if (!is_exact[static_cast<std::size_t>(k)] && mk.sal != 0.0)
            corr = Complex(mk.sal * iq_frozen(k), 0.0);
        E_eff(k) = dq_to_network(s.delta, Complex(s.Edp + corr.real(), s.Eqp));
    }

    const auto ne = static_cast<Eigen::Index>(exact.size());
    // rhs over exact rows: Y_x: * E_eff + Y_xb V_b    (E_eff of exact machines
    // enters without its own correction; that part is solved below)
    CVec rhs_c(ne);
    for (Eigen::Index r = 0; r < ne; ++r) {
        const auto i = static_cast<Eigen::Index>(exact[static_cast<std::size_t>(r)]);
        Complex acc(0.0, 0.0);
        for (Eigen::Index j = 0; j < nm; ++j) acc += net_->Y(i, j) * E_eff(j);
        for (Eigen::Index j = 0; j < nb; ++j) acc += net_->Y(i, nm + j) * boundary_v(j);
        rhs_c(r) = acc;
    }

    Mat S = Mat::Identity(2 * ne, 2 * ne);
    for (Eigen::Index cj = 0; cj < ne; ++cj) {
        const auto j = static_cast<Eigen::Index>(exact[static_cast<std::size_t>(cj)]);
        const auto& mj = machines_[static_cast<std::size_t>(j)];
        if (mj.sal == 0.0) continue;
        const Eigen::Matrix2d Mj =
            saliency_block(mj.sal, emf[static_cast<std::size_t>(j)].delta - M_PI / 2.0);
        for (Eigen::Index ri = 0; ri < ne; ++ri) {
            const auto i = static_cast<Eigen::Index>(exact[static_cast<std::size_t>(ri)]);
            const Complex y = net_->Y(i, j);
            Eigen::Matrix2d Yij;
            Yij << y.real(), -y.imag(), y.imag(), y.real();
            S.block<2, 2>(2 * ri, 2 * cj) -= Yij * Mj;
        }
    }
    Vec rhs(2 * ne);
    for (Eigen::Index r = 0; r < ne; ++r) {
        rhs(2 * r) = rhs_c(r).real();
        rhs(2 * r + 1) = rhs_c(r).imag();
    }
    Vec sol = Eigen::PartialPivLU<Mat>(S).solve(rhs);
    if (!sol.allFinite()) throw SingularNetwork("hybrid network solve produced non-finite values");

    MachineCurrents out;
    out.Id = Vec::Zero(nm);
    out.Iq = Vec::Zero(nm);
    out.Vt = Vec::Zero(nm);
    out.I_net = CVec::Zero(nm);
    for (Eigen::Index r = 0; r < ne; ++r) {
        const auto k = static_cast<Eigen::Index>(exact[static_cast<std::size_t>(r)]);
        const Complex I(sol(2 * r), sol(2 * r + 1));
        const auto& mk = machines_[static_cast<std::size_t>(k)];
        const double delta = emf[static_cast<std::size_t>(k)].delta;
        const Complex idq = network_to_dq(delta, I);
        out.I_net(k) = I;
        out.Id(k) = idq.real();
        out.Iq(k) = idq.imag();
        E_eff(k) += dq_to_network(delta, Complex(mk.sal * idq.imag(), 0.0));
        out.Vt(k) = std::abs(E_eff(k) - Complex(mk.Ra, mk.Xd_p) * I);
    }
    out.E_eff = E_eff;
    if (boundary_currents && nb > 0) {
        *boundary_currents = net_->Y.bottomLeftCorner(nb, nm) * E_eff +
                             net_->Y.bottomRightCorner(nb, nb) * boundary_v;
    }
    return out;
}

}  // namespace redgrid
