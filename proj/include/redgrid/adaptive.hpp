#pragma once

#include <optional>
#include <string>

#include "redgrid/reduction.hpp"

namespace redgrid {

enum class ReductionMethod { None, Full, Linear, Rotor, PF };

const char* method_name(ReductionMethod m);
ReductionMethod method_from_string(const std::string& name);

struct AdaptiveConfig {
    ReductionMethod method = ReductionMethod::PF;
    double p_max = 0.5;
    double delta_threshold = 10.0 * 3.14159265358979323846 / 180.0;  // rad
    int dominant_count = 2;
    double f_max = 1.0;  // Hz
    double h = 0.01;
    double t_end = 16.0;
    bool truncate_linear = true;   // balanced truncation on the fully linearized model
    bool truncate_hybrid = false;  // opt-in for the hybrid model's linear block
    double bt_tol = 1e-4;
};

/// Offline-computable modal data of the pre-fault external model. The
/// eigensolve and participation table are fault-independent; only the
/// excitation ranking depends on the disturbance.
struct ModalCache {
    LinearModel lin;
    ModalData modal;
    PFTable pf_table;
};

ModalCache build_modal_cache(const PowerSystem& sys, const Partition& part,
                             const EquilibriumInit& init, const PowerFlowSolution& pf);

struct ReductionReport {
    std::string method;
    std::vector<int> nonlinear_buses;         // external generators kept nonlinear
    std::vector<DominantMode> dominant;
    Mat pf_of_selected;                        // ext gens x dominant modes, normalized aggregates
    double t_switch = 0.0;
    Eigen::Index external_model_states = 0;    // reduced external state count after the switch
    double wall_fault_phase = 0.0;             // monolithic pre-fault + fault-on
    double wall_switch = 0.0;
    double wall_post = 0.0;
    bool switch_failed = false;
    std::string switch_error;
};

/// The adaptive run: full detail through the fault, then the selected
/// reduced external model co-simulated with the full-detail study area.
/// `cache` may be null (it is then built internally, outside the timed
/// integration loop).
SimResult run_adaptive(const PowerSystem& sys, const std::optional<FaultSpec>& fault,
                       const AdaptiveConfig& cfg, const EquilibriumInit& init,
                       const PowerFlowSolution& pf, const ModalCache* cache = nullptr,
                       ReductionReport* report = nullptr);

std::string reduction_report_to_json(const ReductionReport& report);

}  // namespace redgrid
