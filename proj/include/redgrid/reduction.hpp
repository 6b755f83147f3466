#pragma once

#include <memory>
#include <vector>

#include "redgrid/dynamics.hpp"
#include "redgrid/small_signal.hpp"

namespace redgrid {

/// Solves A X + X A^T + Q = 0 by complex Schur reduction and triangular
/// back-substitution. A must be strictly stable (Re lambda < -eps_stab);
/// throws UnstableA otherwise. Q is taken as symmetric.
Mat lyapunov_solve(const Mat& A, const Mat& Q, double eps_stab = 1e-6);

struct BalancedTruncation {
    Vec hsv;               // Hankel singular values, non-increasing
    Mat T, Tinv;           // balancing transformation (retained columns) and its inverse
    Eigen::Index order = 0;  // retained order r
    double error_bound = 0.0;  // 2 * sum_{i>r} sigma_i
    double cond = 1.0;         // condition number of the retained transformation
    bool fell_back = false;    // condition number exceeded the limit; no truncation applied
};

struct ReducedLinearSystem {
    Mat Ar, Br, Cr;
};

/// Square-root balanced truncation of a stable (A, B, C). Retains the
/// smallest r with sigma_{r+1}/sigma_1 < tol. A condition number above
/// `cond_limit` falls back to the identity transformation (no truncation),
/// reported via `fell_back`.
BalancedTruncation balanced_truncate(const Mat& A, const Mat& B, const Mat& C, double tol,
                                     ReducedLinearSystem* reduced = nullptr,
                                     double cond_limit = 1e10, double eps_stab = 1e-6);

/// Full reduction pipeline for a possibly marginally-stable model: modes with
/// Re lambda >= -eps_stab are deflated via a real invariant-subspace basis
/// and kept unreduced; only the strictly stable block is balanced-truncated.
struct DeflatedReduction {
    Mat Ar, Br, Cr;       // combined reduced system (marginal block first)
    Mat V, W;             // dx = V z, z = W dx
    Eigen::Index n_marginal = 0;
    BalancedTruncation bt;       // of the stable block
    bool truncation_applied = false;
};

DeflatedReduction reduce_stable_subspace(const Mat& A, const Mat& B, const Mat& C, double bt_tol,
                                         double eps_stab = 1e-6, double cond_limit = 1e10);

/// Runtime context the reduced external models evaluate against: the
/// external area, its pre-fault network, and the equilibrium machine
/// currents (frozen saliency corrections for linearized machines).
struct ExternalContext {
    AreaModel area;
    std::unique_ptr<ReducedNetwork> net;  // stable address: the solver points at it
    std::unique_ptr<NetworkSolver> solver;
    Vec iq0;

    static ExternalContext build(const PowerSystem& sys, const Partition& part,
                                 const EquilibriumInit& init, const PowerFlowSolution& pf);
};

/// External-area reduced model: generators in the nonlinear set keep their
/// full equations (reading linearized partners through the reconstruction
/// map), the rest advance by the selected rows of the linearization. An
/// empty nonlinear set degenerates to the fully linearized model, which may
/// be balanced-truncated.
class ReducedExternalModel {
public:
    /// Fully linearized external model (optionally balanced-truncated).
    static ReducedExternalModel linear(const LinearModel& lin, bool truncate, double bt_tol = 1e-4);

    /// Hybrid model with the given nonlinear generator set (positions within
    /// the external area). Truncating the linear block is opt-in.
    static ReducedExternalModel hybrid(const LinearModel& lin, std::vector<std::size_t> nonlinear,
                                       std::size_t gen_count, bool truncate_linear_block = false,
                                       double bt_tol = 1e-4);

    Eigen::Index state_size() const;
    std::size_t gen_count() const { return gen_count_; }
    const std::vector<std::size_t>& nonlinear_gens() const { return nonlinear_; }
    const std::vector<std::size_t>& linear_gens() const { return linear_; }
    bool is_pure_linear() const { return nonlinear_.empty(); }
    bool truncated() const { return truncated_; }
    const DeflatedReduction* deflation() const { return deflation_ ? &*deflation_ : nullptr; }
    const BalancedTruncation* block_truncation() const { return bt_ ? &*bt_ : nullptr; }

    /// Projects the external full state at the switch instant.
    Vec init_state(const Vec& x_ext) const;

    /// Reconstructs the full external state vector.
    Vec reconstruct(const Vec& s) const;

    Vec deriv(const ExternalContext& ctx, const Vec& s, const Vec& tie_u) const;
    CVec boundary_currents(const ExternalContext& ctx, const Vec& s, const Vec& tie_u) const;

    /// Row selector P~ (linearized states) and its pairing T~ as dense
    /// matrices, for inspection and serialization.
    Mat selector_P() const;
    Mat selector_T() const;

    const Mat& A_rows() const { return A_rows_; }
    const Mat& B_rows() const { return B_rows_; }
    const Vec& x0() const { return x0_; }
    const Vec& u0() const { return u0_; }

private:
    ReducedExternalModel() = default;

    std::size_t gen_count_ = 0;
    std::vector<std::size_t> nonlinear_;  // sorted generator positions
    std::vector<std::size_t> linear_;
    std::vector<Eigen::Index> nl_idx_;    // flat state indices
    std::vector<Eigen::Index> lin_idx_;
    Vec x0_, u0_;
    CVec y0_;
    Mat A_rows_, B_rows_;  // P~ A and P~ B (full-width rows)
    Mat C_, D_;            // boundary-current output maps (pure-linear path)

    bool truncated_ = false;
    std::optional<DeflatedReduction> deflation_;  // pure-linear truncation
    std::optional<BalancedTruncation> bt_;        // hybrid linear-block truncation
    Mat Vbt_, Wbt_;                               // linear-block coordinates
};

/// External generators whose aggregate participation on any dominant mode
/// reaches p_max. Positions refer to the external area's generator order.
std::vector<std::size_t> select_by_participation(const PFTable& pf, const DominantModes& dominant,
                                                 double p_max);

/// Rotor-angle-deviation baseline: generators whose COI-corrected rotor
/// excursion during the fault-on window exceeds the threshold.
std::vector<std::size_t> select_by_rotor_deviation(const Mat& delta_traj, const Vec& inertia,
                                                   double delta_threshold);

}  // namespace redgrid
