#pragma once

#include <map>
#include <string>

#include "redgrid/adaptive.hpp"

namespace redgrid {

/// Root-mean-square error between two equally sampled series.
double rmse(const Vec& reference, const Vec& candidate);

/// The study-area generator with the largest rotor-angle excursion in the
/// full run; ties break toward the lowest bus id. Returns the index into
/// sys.machines.
std::size_t pick_reference_generator(const PowerSystem& sys, const SimResult& full);

struct MethodTiming {
    double wall_min = 0.0;          // min over repeats
    std::vector<double> wall_runs;
};

struct ComparisonReport {
    int reference_machine_bus = 0;
    std::size_t reference_machine = 0;
    // slot name -> method name -> RMSE (delta in degrees, omega in pu,
    // the rest in their natural per-unit).
    std::map<std::string, std::map<std::string, double>> rmse_table;
    std::map<std::string, MethodTiming> timing;
    std::map<std::string, ReductionReport> reduction;
    FaultSpec fault;
    AdaptiveConfig cfg;
};

/// Runs full, linear, rotor and pf on identical grids and compares them
/// against the full run. Timing is the min over `timing_repeats` runs.
ComparisonReport compare(const PowerSystem& sys, const FaultSpec& fault, const AdaptiveConfig& cfg,
                         int timing_repeats = 3, std::map<std::string, SimResult>* sims = nullptr);

/// Deterministic part of the report (no wall-clock content).
std::string comparison_to_json(const ComparisonReport& rep);
/// Wall-clock section, written separately since it varies run to run.
std::string timing_to_json(const ComparisonReport& rep);

}  // namespace redgrid
