#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "redgrid/dynamics.hpp"
#include "redgrid/network.hpp"

namespace redgrid {

/// State-space model linearized about (x0, u0). Outputs are the boundary
/// current injections, two rectangular components per boundary bus.
struct LinearModel {
    Mat A, B, C, D;
    Vec x0, u0;
    CVec y0;  // boundary currents at the linearization point
};

struct ModalData {
    CVec eigenvalues;
    CMat right;  // columns Phi_i
    CMat left;   // rows Psi_i, scaled so Psi_i * Phi_i = 1
    Vec frequency_hz;
    Vec damping_ratio;
};

struct PFTable {
    CMat raw;         // p_ki = Phi_ki * Psi_ik
    Mat magnitude;    // |p_ki|
    Mat normalized;   // per-mode max-normalized magnitudes
    Mat gen_aggregate;  // per generator: max over its 9 states, per mode
};

struct DominantMode {
    Eigen::Index mode = 0;
    double excitation = 0.0;  // |Z|
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
};

struct DominantModes {
    std::vector<DominantMode> modes;  // sorted by excitation, descending
};

/// Central-difference Jacobian with per-variable scaled perturbations
/// h_k = scale * max(1, |x_k|). Columns are independent.
Mat jacobian_central(const std::function<Vec(const Vec&)>& f, const Vec& x, double scale = 1e-6);
Mat jacobian_forward(const std::function<Vec(const Vec&)>& f, const Vec& x, double scale = 1e-6);

/// Linearizes the external area about its equilibrium. Verifies the
/// residual ||f(x0,u0)||_inf <= tol first (NotAnEquilibrium otherwise).
LinearModel linearize_external(const AreaModel& area, const NetworkSolver& solver, const Vec& x0,
                               const Vec& u0, double equilibrium_tol = 1e-6);

/// Monolithic variant: no inputs, A only (B, C, D empty).
LinearModel linearize_monolithic(const AreaModel& area, const NetworkSolver& solver, const Vec& x0,
                                 double equilibrium_tol = 1e-6);

/// Dense nonsymmetric eigendecomposition with biorthonormal left/right
/// pairs. Left vectors come from inverting the right-eigenvector matrix, with
/// an independent transpose-solve fallback when it is ill-conditioned.
/// Throws ConvergenceFailure when the invariants cannot be met.
ModalData eigensolve(const Mat& A);

/// p_ki = Phi_ki * Psi_ik plus the derived magnitude tables.
/// `gens` tells how many leading 9-slot generator blocks the state holds.
PFTable participation_factors(const ModalData& modal, std::size_t gen_count);

/// Ranks oscillatory sub-`f_max` modes by fault excitation
/// Z_i = |Psi_i . dx0| * max_k |Phi_ki|; conjugate pairs count once.
DominantModes select_dominant_modes(const ModalData& modal, const Vec& dx0, int count = 2,
                                    double f_max = 1.0);

}  // namespace redgrid
