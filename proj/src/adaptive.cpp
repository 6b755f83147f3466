#include "redgrid/adaptive.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

namespace redgrid {

const char* method_name(ReductionMethod m) {
    switch (m) {
        case ReductionMethod::None: return "none";
        case ReductionMethod::Full: return "full";
        case ReductionMethod::Linear: return "linear";
        case ReductionMethod::Rotor: return "rotor";
        default: return "pf";
    }
}

ReductionMethod method_from_string(const std::string& name) {
    if (name == "none") return ReductionMethod::None;
    if (name == "full") return ReductionMethod::Full;
    if (name == "linear") return ReductionMethod::Linear;
    if (name == "rotor") return ReductionMethod::Rotor;
    if (name == "pf") return ReductionMethod::PF;
    throw ValidationError("method", "unknown reduction method \"" + name + "\"");
}

ModalCache build_modal_cache(const PowerSystem& sys, const Partition& part,
                             const EquilibriumInit& init, const PowerFlowSolution& pf) {
    ModalCache cache;
    const auto ctx = ExternalContext::build(sys, part, init, pf);
    Vec x0(static_cast<Eigen::Index>(ctx.area.machine_indices().size()) * kSlotsPerGen);
    for (std::size_t g = 0; g < ctx.area.machine_indices().size(); ++g)
        x0.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
            init.x0.segment(static_cast<Eigen::Index>(ctx.area.machine_indices()[g]) * kSlotsPerGen,
                            kSlotsPerGen);
    cache.lin = linearize_external(ctx.area, *ctx.solver, x0, init.u0);
    cache.modal = eigensolve(cache.lin.A);
    cache.pf_table = participation_factors(cache.modal, ctx.area.machine_indices().size());
    return cache;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec extract_area_state(const Vec& x_full, const std::vector<std::size_t>& machines) {
    Vec x(static_cast<Eigen::Index>(machines.size()) * kSlotsPerGen);
    for (std::size_t g = 0; g < machines.size(); ++g)
        x.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
            x_full.segment(static_cast<Eigen::Index>(machines[g]) * kSlotsPerGen, kSlotsPerGen);
    return x;
}

}  // namespace

SimResult run_adaptive(const PowerSystem& sys, const std::optional<FaultSpec>& fault,
                       const AdaptiveConfig& cfg, const EquilibriumInit& init,
                       const PowerFlowSolution& pf, const ModalCache* cache,
                       ReductionReport* report) {
    ReductionReport local_report;
    ReductionReport& rep = report ? *report : local_report;
    rep.method = method_name(cfg.method);

    const bool monolithic_only = cfg.method == ReductionMethod::None ||
                                 cfg.method == ReductionMethod::Full || !sys.partition || !fault;
    if (monolithic_only) {
        SimResult res = integrate_full(sys, init, pf, fault, cfg.t_end, cfg.h);
        rep.wall_fault_phase = res.wall_seconds;
        rep.t_switch = cfg.t_end;
        return res;
    }

    const Partition& part = *sys.partition;
    if (!is_study_bus(part, fault->bus))
        throw ValidationError("fault.bus", "faults are supported inside the study area only");

    ModalCache local_cache;
    if (!cache) {
        local_cache = build_modal_cache(sys, part, init, pf);
        cache = &local_cache;
    }

    // Phase 1-2: both areas in full detail (monolithic) through fault clearing.
    const auto area_full = AreaModel::monolithic(sys, init);
    const auto nets = build_monolithic_networks(sys, pf, fault);
    const NetworkSolver solver_pre(&nets.pre, machine_interfaces(sys));
    const NetworkSolver solver_on(&*nets.on, machine_interfaces(sys));

    SimResult res;
    const auto n_steps = static_cast<Eigen::Index>(std::llround(cfg.t_end / cfg.h));
    res.times.resize(n_steps + 1);
    res.states.resize(n_steps + 1, init.x0.size());

    const double t_on = snap_to_grid(fault->t_on, cfg.h, "fault on", res.events);
    const double t_clear = snap_to_grid(fault->t_clear, cfg.h, "fault clear", res.events);
    const auto k_on = static_cast<Eigen::Index>(std::llround(t_on / cfg.h));
    const auto k_clear = static_cast<Eigen::Index>(std::llround(t_clear / cfg.h));
    res.events.push_back({t_on, "fault on at bus " + std::to_string(fault->bus)});
    res.events.push_back({t_clear, "fault cleared"});
    rep.t_switch = t_clear;

    Vec x = init.x0;
    res.times(0) = 0.0;
    res.states.row(0) = x.transpose();

    const auto t0 = Clock::now();
    for (Eigen::Index k = 0; k < k_clear; ++k) {
        const NetworkSolver& solver = (k >= k_on && k < k_clear) ? solver_on : solver_pre;
        const Vec k1 = area_full.rhs(solver, x);
        const Vec k2 = area_full.rhs(solver, x + (cfg.h / 2.0) * k1);
        const Vec k3 = area_full.rhs(solver, x + (cfg.h / 2.0) * k2);
        const Vec k4 = area_full.rhs(solver, x + cfg.h * k3);
        x += (cfg.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t = static_cast<double>(k + 1) * cfg.h;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (!std::isfinite(x(i))) throw NumericalBlowup(t, static_cast<int>(i));
        res.times(k + 1) = t;
        res.states.row(k + 1) = x.transpose();
    }
    rep.wall_fault_phase = seconds_since(t0);

    // Phase 3: build the reduced external model from the fault-excited
    // deviation. Failures fall back to a full-detail continuation.
    const auto t_switch_start = Clock::now();
    const auto ext_machines_idx = external_machines(sys, part);
    const auto study_machines_idx = study_machines(sys, part);

    std::optional<ExternalContext> ctx;
    std::optional<ReducedExternalModel> model;
    Vec x_ext = extract_area_state(x, ext_machines_idx);
    try {
        ctx.emplace(ExternalContext::build(sys, part, init, pf));
        const Vec dx0 = x_ext - cache->lin.x0;

        const auto dominant =
            select_dominant_modes(cache->modal, dx0, cfg.dominant_count, cfg.f_max);
        rep.dominant = dominant.modes;
        rep.pf_of_selected.resize(static_cast<Eigen::Index>(ext_machines_idx.size()),
                                  static_cast<Eigen::Index>(dominant.modes.size()));
        for (Eigen::Index g = 0; g < rep.pf_of_selected.rows(); ++g)
            for (std::size_t d = 0; d < dominant.modes.size(); ++d)
                rep.pf_of_selected(g, static_cast<Eigen::Index>(d)) =
                    cache->pf_table.gen_aggregate(g, dominant.modes[d].mode);

        std::vector<std::size_t> nonlinear;
        switch (cfg.method) {
            case ReductionMethod::PF:
                nonlinear = select_by_participation(cache->pf_table, dominant, cfg.p_max);
                model = ReducedExternalModel::hybrid(cache->lin, nonlinear,
                                                     ext_machines_idx.size(), cfg.truncate_hybrid,
                                                     cfg.bt_tol);
                break;
            case ReductionMethod::Rotor: {
                // COI-corrected rotor excursions over the fault-on window.
                Mat delta(k_clear - k_on + 1, static_cast<Eigen::Index>(ext_machines_idx.size()));
                Vec inertia(static_cast<Eigen::Index>(ext_machines_idx.size()));
                for (std::size_t g = 0; g < ext_machines_idx.size(); ++g) {
                    inertia(static_cast<Eigen::Index>(g)) = sys.machines[ext_machines_idx[g]].H;
                    for (Eigen::Index k = k_on; k <= k_clear; ++k)
                        delta(k - k_on, static_cast<Eigen::Index>(g)) = res.states(
                            k, static_cast<Eigen::Index>(ext_machines_idx[g]) * kSlotsPerGen +
                                   static_cast<int>(Slot::Delta));
                }
                nonlinear = select_by_rotor_deviation(delta, inertia, cfg.delta_threshold);
                model = ReducedExternalModel::hybrid(cache->lin, nonlinear,
                                                     ext_machines_idx.size(), cfg.truncate_hybrid,
                                                     cfg.bt_tol);
                break;
            }
            default:
                model = ReducedExternalModel::linear(cache->lin, cfg.truncate_linear, cfg.bt_tol);
                break;
        }
        for (std::size_t g : model->nonlinear_gens())
            rep.nonlinear_buses.push_back(sys.machines[ext_machines_idx[g]].bus);
        rep.external_model_states = model->state_size();
    } catch (const Error& e) {
        rep.switch_failed = true;
        rep.switch_error = e.what();
        res.events.push_back({t_clear, std::string("switch failed, continuing full detail: ") +
                                           e.what()});
    }

    if (rep.switch_failed) {
        // Full-detail continuation on the post-fault network.
        const auto t_cont = Clock::now();
        for (Eigen::Index k = k_clear; k < n_steps; ++k) {
            const Vec k1 = area_full.rhs(solver_pre, x);
            const Vec k2 = area_full.rhs(solver_pre, x + (cfg.h / 2.0) * k1);
            const Vec k3 = area_full.rhs(solver_pre, x + (cfg.h / 2.0) * k2);
            const Vec k4 = area_full.rhs(solver_pre, x + cfg.h * k3);
            x += (cfg.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const double t = static_cast<double>(k + 1) * cfg.h;
            for (Eigen::Index i = 0; i < x.size(); ++i)
                if (!std::isfinite(x(i))) throw NumericalBlowup(t, static_cast<int>(i));
            res.times(k + 1) = t;
            res.states.row(k + 1) = x.transpose();
        }
        rep.wall_post = seconds_since(t_cont);
        res.wall_seconds = rep.wall_fault_phase + rep.wall_post;
        return res;
    }

    // Seed the exchange from the monolithic state so the hand-off is
    // continuous: recover bus voltages, then boundary voltages and tie
    // currents, from the post-fault network at t_clear.
    const auto cur_clear = solver_pre.solve_with_boundary_voltages(area_full.emf_states(x), CVec());
    const BusVoltageSolver bus_solver(sys, Snapshot::PostFault, std::nullopt, pf.v_mag);
    const CVec v_bus = bus_solver.solve(cur_clear.E_eff);

    const auto nb = static_cast<Eigen::Index>(part.boundary_buses.size());
    CVec ib = CVec::Zero(nb);
    auto boundary_pos = [&](int bus_id) {
        for (Eigen::Index k = 0; k < nb; ++k)
            if (part.boundary_buses[static_cast<std::size_t>(k)] == bus_id) return k;
        throw DimensionMismatch("not a boundary bus");
    };
    for (std::size_t t = 0; t < part.tie_lines.size(); ++t) {
        const auto& br = sys.branches[part.tie_lines[t]];
        const bool from_study = is_study_bus(part, br.from_bus);
        const Complex Vf = v_bus(static_cast<Eigen::Index>(sys.bus_index(br.from_bus)));
        const Complex Vt = v_bus(static_cast<Eigen::Index>(sys.bus_index(br.to_bus)));
        const Complex y = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b_charging / 2.0);
        const double a = br.tap_ratio;
        const Complex into_study = from_study ? (y / a) * Vt - (y / (a * a) + ysh) * Vf
                                              : (y / a) * Vf - (y + ysh) * Vt;
        ib(boundary_pos(from_study ? br.from_bus : br.to_bus)) += into_study;
    }

    const auto study = AreaModel::study(sys, part, init);
    auto study_nets = build_study_networks(sys, part, pf, std::nullopt);
    const CMat Yeq = boundary_block(*ctx->net);
    add_boundary_admittance(study_nets.pre, Yeq);
    const NetworkSolver study_solver(&study_nets.pre,
                                     machine_interfaces_subset(sys, study_machines_idx));

    Vec x_s = extract_area_state(x, study_machines_idx);
    Vec s_ext = model->init_state(x_ext);
    CVec vb(nb);
    for (Eigen::Index k = 0; k < nb; ++k)
        vb(k) = v_bus(static_cast<Eigen::Index>(
            sys.bus_index(part.boundary_buses[static_cast<std::size_t>(k)])));
    CVec J = ib + Yeq * vb;
    Vec tie_u(2 * static_cast<Eigen::Index>(part.tie_lines.size()));
    for (std::size_t t = 0; t < part.tie_lines.size(); ++t) {
        const auto& br = sys.branches[part.tie_lines[t]];
        const int sb = is_study_bus(part, br.from_bus) ? br.from_bus : br.to_bus;
        const Complex v = v_bus(static_cast<Eigen::Index>(sys.bus_index(sb)));
        tie_u(2 * static_cast<Eigen::Index>(t)) = std::arg(v);
        tie_u(2 * static_cast<Eigen::Index>(t) + 1) = std::abs(v);
    }
    rep.wall_switch = seconds_since(t_switch_start);

    // Phase 4: co-simulation, study full / external reduced. The external
    // trajectory is stored in reduced coordinates and expanded after the
    // timed loop.
    Mat ext_traj(n_steps + 1 - k_clear, s_ext.size());
    ext_traj.row(0) = s_ext.transpose();

    const auto t_post = Clock::now();
    for (Eigen::Index k = k_clear; k < n_steps; ++k) {
        // Step-boundary exchange: study publishes voltages, external replies
        // with tie currents; both stay frozen for the step. The first
        // iteration reuses the seeded monolithic values.
        if (k > k_clear) {
            vb = study.publish_boundary_voltages(study_solver, x_s, J);
            tie_u = study.inputs_from_boundary_voltages(vb, &tie_u);
            ib = model->boundary_currents(*ctx, s_ext, tie_u);
            J = ib + Yeq * vb;
        }

        const Vec e1 = model->deriv(*ctx, s_ext, tie_u);
        const Vec e2 = model->deriv(*ctx, s_ext + (cfg.h / 2.0) * e1, tie_u);
        const Vec e3 = model->deriv(*ctx, s_ext + (cfg.h / 2.0) * e2, tie_u);
        const Vec e4 = model->deriv(*ctx, s_ext + cfg.h * e3, tie_u);
        s_ext += (cfg.h / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4);

        const Vec s1 = study.rhs_study(study_solver, x_s, J);
        const Vec s2 = study.rhs_study(study_solver, x_s + (cfg.h / 2.0) * s1, J);
        const Vec s3 = study.rhs_study(study_solver, x_s + (cfg.h / 2.0) * s2, J);
        const Vec s4 = study.rhs_study(study_solver, x_s + cfg.h * s3, J);
        x_s += (cfg.h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4);

        const double t = static_cast<double>(k + 1) * cfg.h;
        for (Eigen::Index i = 0; i < x_s.size(); ++i)
            if (!std::isfinite(x_s(i))) throw NumericalBlowup(t, static_cast<int>(i));
        for (Eigen::Index i = 0; i < s_ext.size(); ++i)
            if (!std::isfinite(s_ext(i))) throw NumericalBlowup(t, static_cast<int>(i));

        res.times(k + 1) = t;
        for (std::size_t g = 0; g < study_machines_idx.size(); ++g)
            res.states.row(k + 1).segment(
                static_cast<Eigen::Index>(study_machines_idx[g]) * kSlotsPerGen, kSlotsPerGen) =
                x_s.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen).transpose();
        ext_traj.row(k + 1 - k_clear) = s_ext.transpose();
    }
    rep.wall_post = seconds_since(t_post);
    res.wall_seconds = rep.wall_fault_phase + rep.wall_switch + rep.wall_post;

    for (Eigen::Index k = k_clear; k <= n_steps; ++k) {
        const Vec x_rec = model->reconstruct(ext_traj.row(k - k_clear).transpose());
        for (std::size_t g = 0; g < ext_machines_idx.size(); ++g)
            res.states.row(k).segment(
                static_cast<Eigen::Index>(ext_machines_idx[g]) * kSlotsPerGen, kSlotsPerGen) =
                x_rec.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen).transpose();
    }
    res.events.push_back(
        {t_clear, "external area switched to " + rep.method + " model with " +
                      std::to_string(rep.nonlinear_buses.size()) + " nonlinear generators"});
    return res;
}

std::string reduction_report_to_json(const ReductionReport& rep) {
    nlohmann::json j;
    j["method"] = rep.method;
    j["nonlinear_generator_buses"] = rep.nonlinear_buses;
    j["t_switch"] = rep.t_switch;
    j["external_model_states"] = rep.external_model_states;
    j["switch_failed"] = rep.switch_failed;
    if (rep.switch_failed) j["switch_error"] = rep.switch_error;
    j["dominant_modes"] = nlohmann::json::array();
    for (const auto& m : rep.dominant)
        j["dominant_modes"].push_back({{"mode", m.mode},
                                       {"frequency_hz", m.frequency_hz},
                                       {"damping_ratio", m.damping_ratio},
                                       {"excitation", m.excitation}});
    j["timings"] = {{"fault_phase_s", rep.wall_fault_phase},
                    {"switch_s", rep.wall_switch},
                    {"post_fault_s", rep.wall_post}};
    return j.dump(2);
}

}  // namespace redgrid
