#include "redgrid/bench.hpp"

#include <cmath>
#include <cstdlib>
#include <future>

#include <json.hpp>

namespace redgrid {

double rmse(const Vec& reference, const Vec& candidate) {
    if (reference.size() != candidate.size())
        throw LengthMismatch(static_cast<std::size_t>(reference.size()),
                             static_cast<std::size_t>(candidate.size()));
    if (reference.size() == 0) throw LengthMismatch(0, 0);
    return std::sqrt((reference - candidate).squaredNorm() / static_cast<double>(reference.size()));
}

std::size_t pick_reference_generator(const PowerSystem& sys, const SimResult& full) {
    std::vector<std::size_t> candidates;
    if (sys.partition) {
        candidates = study_machines(sys, *sys.partition);
    } else {
        candidates.resize(sys.machines.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    }
    std::size_t best = candidates.front();
    double best_dev = -1.0;
    for (std::size_t g : candidates) {
        const auto col = static_cast<Eigen::Index>(g) * kSlotsPerGen + static_cast<int>(Slot::Delta);
        const double dev =
            (full.states.col(col).array() - full.states(0, col)).abs().maxCoeff();
        // Strictly-greater keeps the lowest bus id on ties (machines are
        // ordered by ascending bus id).
        if (dev > best_dev) {
            best_dev = dev;
            best = g;
        }
    }
    return best;
}

namespace {

int thread_budget() {
    const char* env = std::getenv("REDGRID_THREADS");
    if (!env) return 1;
    const int v = std::atoi(env);
    return v > 0 ? v : 1;
}

}  // namespace

ComparisonReport compare(const PowerSystem& sys, const FaultSpec& fault, const AdaptiveConfig& cfg,
                         int timing_repeats, std::map<std::string, SimResult>* sims_out) {
    if (!sys.partition) throw ValidationError("partition", "compare needs a partitioned system");
    const auto pf = solve_power_flow(sys);
    const auto init = init_dynamic_state(sys, pf);
    const auto cache = build_modal_cache(sys, *sys.partition, init, pf);

    const std::vector<ReductionMethod> methods = {ReductionMethod::Full, ReductionMethod::Linear,
                                                  ReductionMethod::Rotor, ReductionMethod::PF};

    ComparisonReport rep;
    rep.fault = fault;
    rep.cfg = cfg;

    std::map<std::string, SimResult> sims;
    std::map<std::string, ReductionReport> reports;

    auto run_one = [&](ReductionMethod m) {
        AdaptiveConfig c = cfg;
        c.method = m;
        ReductionReport r;
        SimResult s = run_adaptive(sys, fault, c, init, pf, &cache, &r);
        return std::make_pair(std::move(s), std::move(r));
    };

    const int budget = thread_budget();
    if (budget > 1) {
        std::vector<std::future<std::pair<SimResult, ReductionReport>>> futures;
        for (auto m : methods)
            futures.push_back(std::async(std::launch::async, [&, m] { return run_one(m); }));
        for (std::size_t i = 0; i < methods.size(); ++i) {
            auto [s, r] = futures[i].get();
            sims[method_name(methods[i])] = std::move(s);
            reports[method_name(methods[i])] = std::move(r);
        }
    } else {
        for (auto m : methods) {
            auto [s, r] = run_one(m);
            sims[method_name(m)] = std::move(s);
            reports[method_name(m)] = std::move(r);
        }
    }

    // Timing: sequential repeats; the first (trajectory) run counts too.
    for (auto m : methods) {
        MethodTiming t;
        t.wall_runs.push_back(sims[method_name(m)].wall_seconds);
        for (int k = 1; k < timing_repeats; ++k) t.wall_runs.push_back(run_one(m).first.wall_seconds);
        t.wall_min = *std::min_element(t.wall_runs.begin(), t.wall_runs.end());
        rep.timing[method_name(m)] = t;
    }

    const SimResult& full = sims["full"];
    rep.reference_machine = pick_reference_generator(sys, full);
    rep.reference_machine_bus = sys.machines[rep.reference_machine].bus;

    const auto base = static_cast<Eigen::Index>(rep.reference_machine) * kSlotsPerGen;
    for (int s = 0; s < kSlotsPerGen; ++s) {
        const auto slot = static_cast<Slot>(s);
        double scale = 1.0;
        if (slot == Slot::Delta) scale = 180.0 / M_PI;   // degrees
        if (slot == Slot::Omega) scale = 1.0 / kOmegaSync;  // per-unit speed
        const Vec ref = full.states.col(base + s) * scale;
        for (auto m : methods) {
            if (m == ReductionMethod::Full) continue;
            const Vec cand = sims[method_name(m)].states.col(base + s) * scale;
            rep.rmse_table[kSlotNames[static_cast<std::size_t>(s)]][method_name(m)] =
                rmse(ref, cand);
        }
    }
    rep.reduction = std::move(reports);
    if (sims_out) *sims_out = std::move(sims);
    return rep;
}

std::string comparison_to_json(const ComparisonReport& rep) {
    nlohmann::json j;
    j["scenario"] = {{"fault_bus", rep.fault.bus},
                     {"t_on", rep.fault.t_on},
                     {"t_clear", rep.fault.t_clear},
                     {"h", rep.cfg.h},
                     {"t_end", rep.cfg.t_end},
                     {"p_max", rep.cfg.p_max},
                     {"delta_threshold_rad", rep.cfg.delta_threshold},
                     {"dominant_count", rep.cfg.dominant_count},
                     {"f_max_hz", rep.cfg.f_max}};
    j["reference_generator"] = {{"machine", rep.reference_machine},
                                {"bus", rep.reference_machine_bus}};
    nlohmann::json tbl;
    for (const auto& [slot, row] : rep.rmse_table) {
        for (const auto& [method, val] : row) tbl[slot][method] = val;
    }
    j["rmse"] = tbl;
    j["units"] = {{"delta", "degrees"}, {"omega", "pu"}, {"default", "pu"}};
    for (const auto& [method, r] : rep.reduction) {
        j["reduction"][method] = {{"nonlinear_generator_buses", r.nonlinear_buses},
                                  {"external_model_states", r.external_model_states},
                                  {"switch_failed", r.switch_failed}};
        nlohmann::json modes = nlohmann::json::array();
        for (const auto& m : r.dominant)
            modes.push_back({{"frequency_hz", m.frequency_hz},
                             {"damping_ratio", m.damping_ratio},
                             {"excitation", m.excitation}});
        j["reduction"][method]["dominant_modes"] = modes;
    }
    return j.dump(2);
}

std::string timing_to_json(const ComparisonReport& rep) {
    nlohmann::json j;
    for (const auto& [method, t] : rep.timing) {
        j[method] = {{"wall_min_s", t.wall_min}, {"runs_s", t.wall_runs}};
    }
    return j.dump(2);
}

}  // namespace redgrid
