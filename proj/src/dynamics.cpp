#include "redgrid/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace redgrid {

void gen_block_rhs(const GenBlock& g, const double* x, double Id, double Iq, double Vt, double* dx) {
    const auto& m = g.mach;
    const auto& e = g.exc;
    const auto& gv = g.gov;

    const double Pm = x[static_cast<int>(Slot::Pm)];
    const double Pgv = x[static_cast<int>(Slot::Pgv)];
    const double VR = x[static_cast<int>(Slot::VR)];
    const double Rf = x[static_cast<int>(Slot::Rf)];
    const double Efd = x[static_cast<int>(Slot::Efd)];
    const double Edp = x[static_cast<int>(Slot::Edp)];
    const double Eqp = x[static_cast<int>(Slot::Eqp)];
    const double omega = x[static_cast<int>(Slot::Omega)];

    const double Pe = Edp * Id + Eqp * Iq + (m.Xq_p - m.Xd_p) * Id * Iq;

    dx[static_cast<int>(Slot::Delta)] = omega - kOmegaSync;
    dx[static_cast<int>(Slot::Omega)] =
        (kOmegaSync / (2.0 * m.H)) * (Pm - Pe - m.D * (omega - kOmegaSync) / kOmegaSync);

    dx[static_cast<int>(Slot::Eqp)] = (-Eqp - (m.Xd - m.Xd_p) * Id + Efd) / m.Td0_p;
    dx[static_cast<int>(Slot::Edp)] = (-Edp + (m.Xq - m.Xq_p) * Iq) / m.Tq0_p;

    const double SE = e.SE_a * std::exp(e.SE_b * Efd);
    dx[static_cast<int>(Slot::Efd)] = (-(e.KE + SE) * Efd + VR) / e.TE;
    dx[static_cast<int>(Slot::Rf)] = (-Rf + (e.KF / e.TF) * Efd) / e.TF;

    double dVR = (-VR + e.KA * (e.V_ref - Vt + Rf - (e.KF / e.TF) * Efd)) / e.TA;
    if ((VR >= e.VR_max && dVR > 0.0) || (VR <= e.VR_min && dVR < 0.0)) dVR = 0.0;
    dx[static_cast<int>(Slot::VR)] = dVR;

    double dPgv = (-Pgv + gv.P_ref - (1.0 / gv.RD) * (omega / kOmegaSync - 1.0)) / gv.TSV;
    if ((Pgv >= gv.P_sv_max && dPgv > 0.0) || (Pgv <= gv.P_sv_min && dPgv < 0.0)) dPgv = 0.0;
    dx[static_cast<int>(Slot::Pgv)] = dPgv;

    dx[static_cast<int>(Slot::Pm)] = (-Pm + Pgv) / gv.TCH;
}

AreaModel AreaModel::build(const PowerSystem& sys, const EquilibriumInit& init,
                           const std::vector<std::size_t>& machine_idx, AreaRole role,
                           const Partition* part) {
    AreaModel area;
    area.role_ = role;
    area.machine_idx_ = machine_idx;
    area.layout_ = StateLayout(machine_idx.size());
    for (std::size_t i : machine_idx)
        area.gens_.push_back({sys.machines[i], init.exciters[i], init.governors[i]});

    if (part) {
        const auto& boundary = part->boundary_buses;
        area.boundary_first_tie_.assign(boundary.size(), -1);
        for (std::size_t t = 0; t < part->tie_lines.size(); ++t) {
            const auto& br = sys.branches[part->tie_lines[t]];
            const int study_bus = is_study_bus(*part, br.from_bus) ? br.from_bus : br.to_bus;
            const auto it = std::lower_bound(boundary.begin(), boundary.end(), study_bus);
            const auto pos = static_cast<Eigen::Index>(it - boundary.begin());
            area.tie_to_boundary_.push_back(pos);
            if (area.boundary_first_tie_[static_cast<std::size_t>(pos)] < 0)
                area.boundary_first_tie_[static_cast<std::size_t>(pos)] =
                    static_cast<Eigen::Index>(t);
        }
    }
    return area;
}

AreaModel AreaModel::monolithic(const PowerSystem& sys, const EquilibriumInit& init) {
    std::vector<std::size_t> idx(sys.machines.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return build(sys, init, idx, AreaRole::Monolithic, nullptr);
}

AreaModel AreaModel::study(const PowerSystem& sys, const Partition& part,
                           const EquilibriumInit& init) {
    return build(sys, init, study_machines(sys, part), AreaRole::Study, &part);
}

AreaModel AreaModel::external(const PowerSystem& sys, const Partition& part,
                              const EquilibriumInit& init) {
    return build(sys, init, external_machines(sys, part), AreaRole::External, &part);
}

std::vector<MachineEmf> AreaModel::emf_states(const Vec& x) const {
    std::vector<MachineEmf> emf(gens_.size());
    for (std::size_t g = 0; g < gens_.size(); ++g) {
        const auto base = static_cast<Eigen::Index>(g) * kSlotsPerGen;
        emf[g] = {x(base + static_cast<int>(Slot::Delta)), x(base + static_cast<int>(Slot::Edp)),
                  x(base + static_cast<int>(Slot::Eqp))};
    }
    return emf;
}

CVec AreaModel::boundary_voltages_from_inputs(const Vec& u) const {
    CVec vb(static_cast<Eigen::Index>(boundary_first_tie_.size()));
    for (std::size_t k = 0; k < boundary_first_tie_.size(); ++k) {
        const Eigen::Index t = boundary_first_tie_[k];
        vb(static_cast<Eigen::Index>(k)) = std::polar(u(2 * t + 1), u(2 * t));
    }
    return vb;
}

Vec AreaModel::inputs_from_boundary_voltages(const CVec& vb, const Vec* prev_u) const {
    Vec u(2 * static_cast<Eigen::Index>(tie_to_boundary_.size()));
    for (std::size_t t = 0; t < tie_to_boundary_.size(); ++t) {
        const Complex v = vb(tie_to_boundary_[t]);
        double ang = std::arg(v);
        if (prev_u) {
            // Keep the published angle continuous across multiples of 2*pi.
            const double prev = (*prev_u)(2 * static_cast<Eigen::Index>(t));
            ang += 2.0 * M_PI * std::round((prev - ang) / (2.0 * M_PI));
        }
        u(2 * static_cast<Eigen::Index>(t)) = ang;
        u(2 * static_cast<Eigen::Index>(t) + 1) = std::abs(v);
    }
    return u;
}

Vec AreaModel::assemble_rhs(const Vec& x, const MachineCurrents& cur) const {
    Vec dx(x.size());
    for (std::size_t g = 0; g < gens_.size(); ++g) {
        const auto base = static_cast<Eigen::Index>(g) * kSlotsPerGen;
        const auto gi = static_cast<Eigen::Index>(g);
        gen_block_rhs(gens_[g], x.data() + base, cur.Id(gi), cur.Iq(gi), cur.Vt(gi),
                      dx.data() + base);
    }
    return dx;
}

Vec AreaModel::rhs(const NetworkSolver& solver, const Vec& x) const {
    if (x.size() != static_cast<Eigen::Index>(layout_.size()))
        throw DimensionMismatch("state length does not match area layout");
    const auto cur = solver.solve_with_boundary_voltages(emf_states(x), CVec());
    return assemble_rhs(x, cur);
}

Vec AreaModel::rhs_external(const NetworkSolver& solver, const Vec& x, const Vec& tie_u) const {
    if (x.size() != static_cast<Eigen::Index>(layout_.size()))
        throw DimensionMismatch("state length does not match area layout");
    if (tie_u.size() != 2 * static_cast<Eigen::Index>(tie_to_boundary_.size()))
        throw DimensionMismatch("tie input length mismatch");
    const auto cur =
        solver.solve_with_boundary_voltages(emf_states(x), boundary_voltages_from_inputs(tie_u));
    return assemble_rhs(x, cur);
}

Vec AreaModel::rhs_study(const NetworkSolver& solver, const Vec& x, const CVec& boundary_i) const {
    if (x.size() != static_cast<Eigen::Index>(layout_.size()))
        throw DimensionMismatch("state length does not match area layout");
    const auto cur = solver.solve_with_boundary_currents(emf_states(x), boundary_i);
    return assemble_rhs(x, cur);
}

CVec AreaModel::publish_boundary_currents(const NetworkSolver& solver, const Vec& x,
                                          const Vec& tie_u) const {
    CVec ib;
    solver.solve_with_boundary_voltages(emf_states(x), boundary_voltages_from_inputs(tie_u), &ib);
    // The network solve yields the injection into this (external) area's
    // boundary node; the exchange contract carries current into the study
    // area, so flip the sign.
    return -ib;
}

CVec AreaModel::publish_boundary_voltages(const NetworkSolver& solver, const Vec& x,
                                          const CVec& boundary_i) const {
    CVec vb;
    solver.solve_with_boundary_currents(emf_states(x), boundary_i, &vb);
    return vb;
}

NetworkSet build_monolithic_networks(const PowerSystem& sys, const PowerFlowSolution& pf,
                                     const std::optional<FaultSpec>& fault) {
    NetworkSet set;
    set.pre = build_monolithic_network(sys, Snapshot::PreFault, std::nullopt, pf.v_mag);
    if (fault) set.on = build_monolithic_network(sys, Snapshot::OnFault, fault, pf.v_mag);
    return set;
}

NetworkSet build_study_networks(const PowerSystem& sys, const Partition& part,
                                const PowerFlowSolution& pf, const std::optional<FaultSpec>& fault) {
    NetworkSet set;
    set.pre = build_study_network(sys, part, Snapshot::PreFault, std::nullopt, pf.v_mag);
    if (fault) {
        if (!is_study_bus(part, fault->bus))
            throw ValidationError("fault.bus", "faults are supported inside the study area only");
        set.on = build_study_network(sys, part, Snapshot::OnFault, fault, pf.v_mag);
    }
    return set;
}

NetworkSet build_external_networks(const PowerSystem& sys, const Partition& part,
                                   const PowerFlowSolution& pf) {
    NetworkSet set;
    set.pre = build_external_network(sys, part, pf.v_mag);
    return set;
}

double snap_to_grid(double t, double h, const char* label, std::vector<Event>& events) {
    const double snapped = std::round(t / h) * h;
    if (std::abs(snapped - t) > 1e-12)
        events.push_back({snapped, std::string(label) + " snapped from t=" + std::to_string(t)});
    return snapped;
}

namespace {

void check_finite(const Vec& x, double t) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x(i))) throw NumericalBlowup(t, static_cast<int>(i));
}

}  // namespace

SimResult integrate_full(const PowerSystem& sys, const EquilibriumInit& init,
                         const PowerFlowSolution& pf, const std::optional<FaultSpec>& fault,
                         double t_end, double h) {
    if (h <= 0.0) throw ValidationError("h", "step size must be positive");
    const auto area = AreaModel::monolithic(sys, init);
    const auto nets = build_monolithic_networks(sys, pf, fault);
    const NetworkSolver solver_pre(&nets.pre, machine_interfaces(sys));
    std::optional<NetworkSolver> solver_on;
    if (nets.on) solver_on.emplace(&*nets.on, machine_interfaces(sys));

    SimResult res;
    const auto n_steps = static_cast<Eigen::Index>(std::llround(t_end / h));
    res.times.resize(n_steps + 1);
    res.states.resize(n_steps + 1, init.x0.size());

    Eigen::Index k_on = -1, k_clear = -1;
    if (fault) {
        const double t_on = snap_to_grid(fault->t_on, h, "fault on", res.events);
        const double t_clear = snap_to_grid(fault->t_clear, h, "fault clear", res.events);
        k_on = static_cast<Eigen::Index>(std::llround(t_on / h));
        k_clear = static_cast<Eigen::Index>(std::llround(t_clear / h));
        res.events.push_back({t_on, "fault on at bus " + std::to_string(fault->bus)});
        res.events.push_back({t_clear, "fault cleared"});
    }

    Vec x = init.x0;
    res.times(0) = 0.0;
    res.states.row(0) = x.transpose();

    const auto t0 = std::chrono::steady_clock::now();
    for (Eigen::Index k = 0; k < n_steps; ++k) {
        const bool on_fault = fault && k >= k_on && k < k_clear;
        const NetworkSolver& solver = on_fault ? *solver_on : solver_pre;

        const Vec k1 = area.rhs(solver, x);
        const Vec k2 = area.rhs(solver, x + (h / 2.0) * k1);
        const Vec k3 = area.rhs(solver, x + (h / 2.0) * k2);
        const Vec k4 = area.rhs(solver, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double t = static_cast<double>(k + 1) * h;
        check_finite(x, t);
        res.times(k + 1) = t;
        res.states.row(k + 1) = x.transpose();
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

SimResult integrate_partitioned_full(const PowerSystem& sys, const Partition& part,
                                     const EquilibriumInit& init, const PowerFlowSolution& pf,
                                     const std::optional<FaultSpec>& fault, double t_end, double h) {
    if (h <= 0.0) throw ValidationError("h", "step size must be positive");
    const auto study = AreaModel::study(sys, part, init);
    const auto ext = AreaModel::external(sys, part, init);
    auto study_nets = build_study_networks(sys, part, pf, fault);
    const auto ext_nets = build_external_networks(sys, part, pf);

    // Norton interface: the study embeds the external area's passive
    // boundary admittance; the exchanged current is converted to the
    // external Norton source below.
    const CMat Yeq = boundary_block(ext_nets.pre);
    add_boundary_admittance(study_nets.pre, Yeq);
    if (study_nets.on) add_boundary_admittance(*study_nets.on, Yeq);

    const auto study_if = machine_interfaces_subset(sys, study.machine_indices());
    const auto ext_if = machine_interfaces_subset(sys, ext.machine_indices());
    const NetworkSolver study_pre(&study_nets.pre, study_if);
    std::optional<NetworkSolver> study_on;
    if (study_nets.on) study_on.emplace(&*study_nets.on, study_if);
    const NetworkSolver ext_solver(&ext_nets.pre, ext_if);

    // Split the monolithic equilibrium into per-area state vectors.
    const auto split = [&](const std::vector<std::size_t>& idx) {
        Vec x(static_cast<Eigen::Index>(idx.size()) * kSlotsPerGen);
        for (std::size_t g = 0; g < idx.size(); ++g)
            x.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
                init.x0.segment(static_cast<Eigen::Index>(idx[g]) * kSlotsPerGen, kSlotsPerGen);
        return x;
    };
    Vec x_s = split(study.machine_indices());
    Vec x_e = split(ext.machine_indices());

    const auto eq = equilibrium_boundary(sys, part, pf);
    Vec tie_u = eq.tie_inputs;
    CVec ib = eq.boundary_i;
    // Norton source of the external area: the published physical current
    // plus the passive response at the voltage it was computed with.
    CVec J = ib + Yeq * eq.boundary_v;

    SimResult res;
    const auto n_steps = static_cast<Eigen::Index>(std::llround(t_end / h));
    res.times.resize(n_steps + 1);
    res.states.resize(n_steps + 1, init.x0.size());

    Eigen::Index k_on = -1, k_clear = -1;
    if (fault) {
        const double t_on = snap_to_grid(fault->t_on, h, "fault on", res.events);
        const double t_clear = snap_to_grid(fault->t_clear, h, "fault clear", res.events);
        k_on = static_cast<Eigen::Index>(std::llround(t_on / h));
        k_clear = static_cast<Eigen::Index>(std::llround(t_clear / h));
        res.events.push_back({t_on, "fault on at bus " + std::to_string(fault->bus)});
        res.events.push_back({t_clear, "fault cleared"});
    }

    const auto record = [&](Eigen::Index row) {
        for (std::size_t g = 0; g < study.machine_indices().size(); ++g)
            res.states.row(row).segment(
                static_cast<Eigen::Index>(study.machine_indices()[g]) * kSlotsPerGen, kSlotsPerGen) =
                x_s.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen).transpose();
        for (std::size_t g = 0; g < ext.machine_indices().size(); ++g)
            res.states.row(row).segment(
                static_cast<Eigen::Index>(ext.machine_indices()[g]) * kSlotsPerGen, kSlotsPerGen) =
                x_e.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen).transpose();
    };
    res.times(0) = 0.0;
    record(0);

    const auto t0 = std::chrono::steady_clock::now();
    for (Eigen::Index k = 0; k < n_steps; ++k) {
        const bool on_fault = fault && k >= k_on && k < k_clear;
        const NetworkSolver& s_solver = on_fault ? *study_on : study_pre;

        // Step-boundary exchange, staggered: the study publishes boundary
        // voltages first, then the external side reports tie currents with
        // the fresh inputs; both stay frozen for the step.
        const CVec vb = study.publish_boundary_voltages(s_solver, x_s, J);
        tie_u = study.inputs_from_boundary_voltages(vb, &tie_u);
        ib = ext.publish_boundary_currents(ext_solver, x_e, tie_u);
        J = ib + Yeq * vb;

        auto step_area = [&](const AreaModel& area, Vec& x, auto&& rhs_fn) {
            const Vec k1 = rhs_fn(x);
            const Vec k2 = rhs_fn(Vec(x + (h / 2.0) * k1));
            const Vec k3 = rhs_fn(Vec(x + (h / 2.0) * k2));
            const Vec k4 = rhs_fn(Vec(x + h * k3));
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            (void)area;
        };
        step_area(ext, x_e, [&](const Vec& x) { return ext.rhs_external(ext_solver, x, tie_u); });
        step_area(study, x_s, [&](const Vec& x) { return study.rhs_study(s_solver, x, J); });

        const double t = static_cast<double>(k + 1) * h;
        check_finite(x_s, t);
        check_finite(x_e, t);
        res.times(k + 1) = t;
        record(k + 1);
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

void write_states_csv(const std::string& path, const StateLayout& layout, const SimResult& result) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << "t";
    for (std::size_t g = 0; g < layout.gen_count(); ++g)
        for (int s = 0; s < kSlotsPerGen; ++s)
            out << ",gen" << g << "." << kSlotNames[static_cast<std::size_t>(s)];
    out << "\n";
    out.precision(17);
    for (Eigen::Index r = 0; r < result.times.size(); ++r) {
        out << result.times(r);
        for (Eigen::Index c = 0; c < result.states.cols(); ++c) out << "," << result.states(r, c);
        out << "\n";
    }
}

}  // namespace redgrid
