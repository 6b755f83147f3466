#include "redgrid/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "redgrid/bench.hpp"
#include "redgrid/run_config.hpp"
#include "redgrid/system_io.hpp"

namespace redgrid {

namespace {

using nlohmann::json;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << content;
}

json pf_to_json(const PowerSystem& sys, const PowerFlowSolution& sol) {
    json j;
    j["iterations"] = sol.iterations;
    j["max_mismatch"] = sol.max_mismatch;
    j["buses"] = json::array();
    for (std::size_t i = 0; i < sys.buses.size(); ++i)
        j["buses"].push_back({{"id", sys.buses[i].id},
                              {"voltage_mag", sol.v_mag[i]},
                              {"voltage_ang", sol.v_ang[i]}});
    j["machines"] = json::array();
    for (std::size_t g = 0; g < sys.machines.size(); ++g)
        j["machines"].push_back(
            {{"bus", sys.machines[g].bus}, {"p_gen", sol.p_gen[g]}, {"q_gen", sol.q_gen[g]}});
    return j;
}

json summary_to_json(const SimResult& res, const std::string& mode) {
    json j;
    j["mode"] = mode;
    j["steps"] = res.times.size() - 1;
    j["t_end"] = res.times.size() > 0 ? res.times(res.times.size() - 1) : 0.0;
    j["wall_seconds"] = res.wall_seconds;
    j["events"] = json::array();
    for (const auto& e : res.events) j["events"].push_back({{"t", e.t}, {"what", e.what}});
    return j;
}

/// Fault-excited external deviation: runs the monolithic model to the fault
/// clearing instant.
Vec deviation_at_clearing(const PowerSystem& sys, const FaultSpec& fault,
                          const EquilibriumInit& init, const PowerFlowSolution& pf, double h) {
    SimResult upto = integrate_full(sys, init, pf, fault, fault.t_clear, h);
    const Vec x_clear = upto.states.row(upto.states.rows() - 1).transpose();
    if (sys.partition) {
        const auto ext = external_machines(sys, *sys.partition);
        Vec dx(static_cast<Eigen::Index>(ext.size()) * kSlotsPerGen);
        for (std::size_t g = 0; g < ext.size(); ++g) {
            const auto src = static_cast<Eigen::Index>(ext[g]) * kSlotsPerGen;
            dx.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
                x_clear.segment(src, kSlotsPerGen) - init.x0.segment(src, kSlotsPerGen);
        }
        return dx;
    }
    return x_clear - init.x0;
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"redgrid: transient-stability simulation with adaptive external-area reduction"};
    app.require_subcommand(1);
    bool json_errors = false;
    std::string log_level = "info";
    std::string config_path;
    app.add_flag("--json-errors", json_errors, "machine-readable errors on stderr");
    app.add_option("--log-level", log_level, "debug|info|warn|error");
    app.add_option("--config", config_path, "JSON config file (flags take precedence)");

    // pf
    auto* pf_cmd = app.add_subcommand("pf", "solve the pre-fault power flow");
    std::string pf_system;
    pf_cmd->add_option("--system", pf_system, "system file")->required();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "time-domain simulation");
    std::string sim_system, sim_fault, sim_mode = "full", sim_out, sim_report;
    double sim_h = 0, sim_tend = 0;
    sim_cmd->add_option("--system", sim_system, "system file")->required();
    sim_cmd->add_option("--fault", sim_fault, "fault file");
    sim_cmd->add_option("--mode", sim_mode, "full|none|pf|rotor|linear");
    auto* sim_h_opt = sim_cmd->add_option("--h", sim_h, "step size, s");
    auto* sim_tend_opt = sim_cmd->add_option("--t-end", sim_tend, "horizon, s");
    sim_cmd->add_option("--out", sim_out, "output directory");
    sim_cmd->add_option("--report", sim_report, "reduction report path");

    // modal
    auto* modal_cmd = app.add_subcommand("modal", "eigenvalues and participation factors");
    std::string modal_system, modal_fault;
    modal_cmd->add_option("--system", modal_system, "system file")->required();
    modal_cmd->add_option("--fault", modal_fault, "fault file (enables dominant-mode ranking)");

    // reduce
    auto* red_cmd = app.add_subcommand("reduce", "build and serialize a reduced external model");
    std::string red_system, red_fault, red_method = "pf", red_out;
    double red_pmax = 0;
    red_cmd->add_option("--system", red_system, "system file")->required();
    red_cmd->add_option("--fault", red_fault, "fault file")->required();
    red_cmd->add_option("--method", red_method, "pf|rotor|linear");
    auto* red_pmax_opt = red_cmd->add_option("--p-max", red_pmax, "participation threshold");
    red_cmd->add_option("--out", red_out, "model output path")->required();

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "four-way accuracy/speed comparison");
    std::string cmp_system, cmp_fault, cmp_out, cmp_csv_dir, cmp_timing;
    double cmp_pmax = 0;
    cmp_cmd->add_option("--system", cmp_system, "system file")->required();
    cmp_cmd->add_option("--fault", cmp_fault, "fault file")->required();
    cmp_cmd->add_option("--out", cmp_out, "report path")->required();
    cmp_cmd->add_option("--csv-dir", cmp_csv_dir, "per-method states.csv directory");
    cmp_cmd->add_option("--timing-out", cmp_timing, "timing report path (defaults next to --out)");
    auto* cmp_pmax_opt = cmp_cmd->add_option("--p-max", cmp_pmax, "participation threshold");

    std::vector<const char*> argv;
    argv.push_back("redgrid");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (sim_h_opt->count() > 0) cfg.h = sim_h;
    if (sim_tend_opt->count() > 0) cfg.t_end = sim_tend;
    if (red_pmax_opt->count() > 0) cfg.p_max = red_pmax;
    if (cmp_pmax_opt->count() > 0) cfg.p_max = cmp_pmax;

    if (pf_cmd->parsed()) {
        const auto sys = load_system(pf_system);
        const auto sol = solve_power_flow(sys, cfg.pf_tol, cfg.pf_max_iter);
        std::cout << pf_to_json(sys, sol).dump(2) << "\n";
        return 0;
    }

    if (sim_cmd->parsed()) {
        const auto sys = load_system(sim_system);
        std::optional<FaultSpec> fault;
        if (!sim_fault.empty()) fault = load_fault(sim_fault, cfg.t_end);
        const auto pf = solve_power_flow(sys, cfg.pf_tol, cfg.pf_max_iter);
        const auto init = init_dynamic_state(sys, pf);

        const auto method = method_from_string(sim_mode);
        ReductionReport rep;
        const SimResult res =
            run_adaptive(sys, fault, cfg.adaptive(method), init, pf, nullptr, &rep);

        if (!sim_out.empty()) {
            std::filesystem::create_directories(sim_out);
            write_states_csv(sim_out + "/states.csv", sys.layout(), res);
            write_file(sim_out + "/summary.json", summary_to_json(res, sim_mode).dump(2));
        } else {
            std::cout << summary_to_json(res, sim_mode).dump(2) << "\n";
        }
        if (!sim_report.empty()) write_file(sim_report, reduction_report_to_json(rep));
        return 0;
    }

    if (modal_cmd->parsed()) {
        const auto sys = load_system(modal_system);
        const auto pf = solve_power_flow(sys, cfg.pf_tol, cfg.pf_max_iter);
        const auto init = init_dynamic_state(sys, pf);

        LinearModel lin;
        std::size_t gen_count = 0;
        std::vector<int> gen_buses;
        if (sys.partition) {
            const auto cache_ctx = ExternalContext::build(sys, *sys.partition, init, pf);
            gen_count = cache_ctx.area.machine_indices().size();
            for (std::size_t i : cache_ctx.area.machine_indices())
                gen_buses.push_back(sys.machines[i].bus);
            Vec x0(static_cast<Eigen::Index>(gen_count) * kSlotsPerGen);
            for (std::size_t g = 0; g < gen_count; ++g)
                x0.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
                    init.x0.segment(
                        static_cast<Eigen::Index>(cache_ctx.area.machine_indices()[g]) * kSlotsPerGen,
                        kSlotsPerGen);
            lin = linearize_external(cache_ctx.area, *cache_ctx.solver, x0, init.u0);
        } else {
            const auto area = AreaModel::monolithic(sys, init);
            const auto nets = build_monolithic_networks(sys, pf, std::nullopt);
            const NetworkSolver solver(&nets.pre, machine_interfaces(sys));
            lin = linearize_monolithic(area, solver, init.x0);
            gen_count = sys.machines.size();
            for (const auto& m : sys.machines) gen_buses.push_back(m.bus);
        }
        const auto modal = eigensolve(lin.A);
        const auto pft = participation_factors(modal, gen_count);

        json j;
        j["states"] = lin.A.rows();
        j["modes"] = json::array();
        for (Eigen::Index i = 0; i < modal.eigenvalues.size(); ++i) {
            if (modal.eigenvalues(i).imag() < 0.0) continue;
            j["modes"].push_back({{"re", modal.eigenvalues(i).real()},
                                  {"im", modal.eigenvalues(i).imag()},
                                  {"frequency_hz", modal.frequency_hz(i)},
                                  {"damping_ratio", modal.damping_ratio(i)}});
        }
        if (!modal_fault.empty()) {
            const auto fault = load_fault(modal_fault, cfg.t_end);
            const Vec dx0 = deviation_at_clearing(sys, fault, init, pf, cfg.h);
            const auto dom = select_dominant_modes(modal, dx0, cfg.dominant_count, cfg.f_max);
            j["dominant_modes"] = json::array();
            for (const auto& m : dom.modes) {
                json jm = {{"frequency_hz", m.frequency_hz},
                           {"damping_ratio", m.damping_ratio},
                           {"excitation", m.excitation}};
                // generators ranked by aggregate participation in this mode
                std::vector<std::pair<double, int>> ranked;
                for (Eigen::Index g = 0; g < pft.gen_aggregate.rows(); ++g)
                    ranked.emplace_back(pft.gen_aggregate(g, m.mode),
                                        gen_buses[static_cast<std::size_t>(g)]);
                std::sort(ranked.rbegin(), ranked.rend());
                json top = json::array();
                for (std::size_t k = 0; k < ranked.size() && k < 5; ++k)
                    top.push_back({{"bus", ranked[k].second}, {"participation", ranked[k].first}});
                jm["top_generators"] = top;
                j["dominant_modes"].push_back(jm);
            }
        }
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (red_cmd->parsed()) {
        const auto sys = load_system(red_system);
        if (!sys.partition)
            throw ValidationError("partition", "reduce needs a partitioned system");
        const auto fault = load_fault(red_fault, cfg.t_end);
        const auto pf = solve_power_flow(sys, cfg.pf_tol, cfg.pf_max_iter);
        const auto init = init_dynamic_state(sys, pf);
        const auto method = method_from_string(red_method);

        AdaptiveConfig acfg = cfg.adaptive(method);
        ReductionReport rep;
        run_adaptive(sys, fault, acfg, init, pf, nullptr, &rep);

        // Rebuild the model deterministically for serialization.
        const auto cache = build_modal_cache(sys, *sys.partition, init, pf);
        const Vec dx0 = deviation_at_clearing(sys, fault, init, pf, cfg.h);
        const auto dom = select_dominant_modes(cache.modal, dx0, cfg.dominant_count, cfg.f_max);
        const auto ext_idx = external_machines(sys, *sys.partition);
        std::vector<std::size_t> nonlinear;
        if (method == ReductionMethod::PF)
            nonlinear = select_by_participation(cache.pf_table, dom, cfg.p_max);
        else if (method == ReductionMethod::Rotor)
            for (int bus : rep.nonlinear_buses)
                for (std::size_t g = 0; g < ext_idx.size(); ++g)
                    if (sys.machines[ext_idx[g]].bus == bus) nonlinear.push_back(g);
        auto model = method == ReductionMethod::Linear
                         ? ReducedExternalModel::linear(cache.lin, acfg.truncate_linear, acfg.bt_tol)
                         : ReducedExternalModel::hybrid(cache.lin, nonlinear, ext_idx.size(),
                                                        acfg.truncate_hybrid, acfg.bt_tol);

        json j;
        j["method"] = red_method;
        j["nonlinear_generator_buses"] = json::array();
        for (std::size_t g : model.nonlinear_gens())
            j["nonlinear_generator_buses"].push_back(sys.machines[ext_idx[g]].bus);
        j["linear_states"] = model.state_size() -
                             static_cast<Eigen::Index>(model.nonlinear_gens().size()) * kSlotsPerGen;
        j["dominant_modes"] = json::array();
        for (const auto& m : dom.modes)
            j["dominant_modes"].push_back({{"frequency_hz", m.frequency_hz},
                                           {"damping_ratio", m.damping_ratio},
                                           {"excitation", m.excitation}});
        auto mat_to_json = [](const Mat& M) {
            json rows = json::array();
            for (Eigen::Index r = 0; r < M.rows(); ++r) {
                json row = json::array();
                for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
                rows.push_back(row);
            }
            return rows;
        };
        j["A_tilde"] = mat_to_json(model.A_rows());
        j["B_tilde"] = mat_to_json(model.B_rows());
        j["P_selector_rows"] = json::array();
        {
            const Mat P = model.selector_P();
            for (Eigen::Index r = 0; r < P.rows(); ++r)
                for (Eigen::Index c = 0; c < P.cols(); ++c)
                    if (P(r, c) != 0.0) j["P_selector_rows"].push_back(c);
        }
        write_file(red_out, j.dump(2));
        return 0;
    }

    if (cmp_cmd->parsed()) {
        const auto sys = load_system(cmp_system);
        const auto fault = load_fault(cmp_fault, cfg.t_end);
        std::map<std::string, SimResult> sims;
        const auto rep = compare(sys, fault, cfg.adaptive(ReductionMethod::PF),
                                 cfg.timing_repeats, &sims);
        write_file(cmp_out, comparison_to_json(rep));
        std::string timing_path = cmp_timing;
        if (timing_path.empty()) {
            timing_path = cmp_out;
            const auto dot = timing_path.rfind('.');
            timing_path = (dot == std::string::npos ? timing_path : timing_path.substr(0, dot)) +
                          "_timing.json";
        }
        write_file(timing_path, timing_to_json(rep));
        if (!cmp_csv_dir.empty()) {
            std::filesystem::create_directories(cmp_csv_dir);
            for (const auto& [name, sim] : sims)
                write_states_csv(cmp_csv_dir + "/" + name + ".csv", sys.layout(), sim);
        }
        return 0;
    }
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    bool json_errors = false;
    for (const auto& a : args)
        if (a == "--json-errors") json_errors = true;
    try {
        return dispatch(args);
    } catch (const Error& e) {
        const int code = e.kind() == ErrorKind::Validation ? 1 : 2;
        if (json_errors) {
            json j{{"error", e.what()}, {"kind", code == 1 ? "validation" : "numerical"}};
            if (const auto* blow = dynamic_cast<const NumericalBlowup*>(&e)) {
                j["t"] = blow->t;
                j["state_index"] = blow->state_index;
            }
            std::cerr << j.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return code;
    } catch (const std::exception& e) {
        if (json_errors)
            std::cerr << json{{"error", e.what()}, {"kind", "internal"}}.dump() << "\n";
        else
            std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args);
}

}  // namespace redgrid
