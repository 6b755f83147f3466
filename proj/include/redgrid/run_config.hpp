#pragma once

#include <optional>
#include <string>

#include "redgrid/adaptive.hpp"

namespace redgrid {

/// Defaults shared by every subcommand; overridden by a config file, then by
/// command-line flags. Fully deterministic (no seeds anywhere).
struct RunConfig {
    double h = 0.01;
    double t_end = 16.0;
    double p_max = 0.5;
    double delta_threshold_deg = 10.0;
    int dominant_count = 2;
    double f_max = 1.0;
    double bt_tol = 1e-4;
    bool truncate_linear = true;
    bool truncate_hybrid = false;
    double pf_tol = 1e-10;
    int pf_max_iter = 50;
    int timing_repeats = 3;

    AdaptiveConfig adaptive(ReductionMethod method) const;
};

/// Loads overrides from a JSON file; unknown keys are rejected.
RunConfig load_run_config(const std::string& path, const RunConfig& base = RunConfig());
RunConfig run_config_from_string(const std::string& text, const RunConfig& base = RunConfig());

}  // namespace redgrid
