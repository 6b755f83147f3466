#pragma once

#include <vector>

#include "redgrid/network.hpp"
#include "redgrid/types.hpp"

namespace redgrid {

struct PowerFlowSolution {
    std::vector<double> v_mag;   // per bus, indexed like sys.buses
    std::vector<double> v_ang;   // rad
    std::vector<double> p_gen;   // per machine, system base
    std::vector<double> q_gen;
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Polar Newton-Raphson from a flat start. Throws NoConvergence.
PowerFlowSolution solve_power_flow(const PowerSystem& sys, double tol = 1e-10, int max_iter = 50);

/// Dynamic equilibrium: the full state vector x0 (layout order) plus the
/// equilibrium boundary inputs u0 (theta, V per tie line; empty without a
/// partition). V_ref and P_ref are back-computed into the returned copies of
/// the controller blocks so that all limits are inactive.
struct EquilibriumInit {
    Vec x0;
    Vec u0;
    std::vector<ExciterIEEE1> exciters;     // with V_ref filled in
    std::vector<GovernorTurbine> governors; // with P_ref filled in
};

EquilibriumInit init_dynamic_state(const PowerSystem& sys, const PowerFlowSolution& pf);

/// Equilibrium boundary-bus complex voltages and tie currents into the study
/// area, for seeding the co-simulation exchange.
struct EquilibriumBoundary {
    CVec boundary_v;   // per boundary bus
    CVec boundary_i;   // per boundary bus, into the study area
    Vec tie_inputs;    // 2 per tie line: theta, V of the study-side endpoint
};

EquilibriumBoundary equilibrium_boundary(const PowerSystem& sys, const Partition& part,
                                         const PowerFlowSolution& pf);

}  // namespace redgrid
