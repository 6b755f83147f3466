#pragma once

#include <optional>
#include <string>
#include <vector>

#include "redgrid/network.hpp"
#include "redgrid/power_flow.hpp"
#include "redgrid/types.hpp"

namespace redgrid {

struct Event {
    double t = 0.0;
    std::string what;
};

struct SimResult {
    Vec times;
    Mat states;  // one row per grid point, columns in state-layout order
    std::vector<Event> events;
    double wall_seconds = 0.0;  // integration loop only
};

/// Per-machine dynamic block: the nine first-order equations of the two-axis
/// machine, IEEE type-1 exciter and governor/turbine chain.
struct GenBlock {
    Machine mach;
    ExciterIEEE1 exc;
    GovernorTurbine gov;
};

/// Evaluates the nine per-generator equations. `x` and `dx` point at the
/// generator's 9-slot block; Id/Iq/Vt come from the network solve.
void gen_block_rhs(const GenBlock& g, const double* x, double Id, double Iq, double Vt, double* dx);

/// Electrical air-gap power for one machine block.
inline double electrical_power(const GenBlock& g, const double* x, double Id, double Iq) {
    return x[static_cast<int>(Slot::Edp)] * Id + x[static_cast<int>(Slot::Eqp)] * Iq +
           (g.mach.Xq_p - g.mach.Xd_p) * Id * Iq;
}

enum class AreaRole { Monolithic, Study, External };

/// One dynamically simulated area: a machine subset, its controller blocks
/// and the coupling role toward the partition boundary. Immutable once
/// built; rhs evaluation is pure.
class AreaModel {
public:
    static AreaModel monolithic(const PowerSystem& sys, const EquilibriumInit& init);
    static AreaModel study(const PowerSystem& sys, const Partition& part, const EquilibriumInit& init);
    static AreaModel external(const PowerSystem& sys, const Partition& part,
                              const EquilibriumInit& init);

    AreaRole role() const { return role_; }
    const StateLayout& layout() const { return layout_; }
    const std::vector<GenBlock>& gens() const { return gens_; }
    const std::vector<std::size_t>& machine_indices() const { return machine_idx_; }
    std::size_t tie_count() const { return tie_to_boundary_.size(); }
    std::size_t boundary_count() const { return boundary_first_tie_.size(); }

    /// Extracts the EMF states feeding the network solve.
    std::vector<MachineEmf> emf_states(const Vec& x) const;

    /// Maps the tie-input vector (theta, V per tie) onto boundary-bus
    /// voltages; duplicate entries for a shared bus mirror the first one.
    CVec boundary_voltages_from_inputs(const Vec& u) const;

    /// Inverse of the above for publication; `prev_u` keeps angles continuous.
    Vec inputs_from_boundary_voltages(const CVec& vb, const Vec* prev_u) const;

    /// Monolithic role (and External with u): full nonlinear derivative.
    Vec rhs(const NetworkSolver& solver, const Vec& x) const;
    Vec rhs_external(const NetworkSolver& solver, const Vec& x, const Vec& tie_u) const;

    /// Study role: boundary currents from the neighbour are injections.
    Vec rhs_study(const NetworkSolver& solver, const Vec& x, const CVec& boundary_i) const;

    /// Publication helpers (step-boundary exchange).
    CVec publish_boundary_currents(const NetworkSolver& solver, const Vec& x, const Vec& tie_u) const;
    CVec publish_boundary_voltages(const NetworkSolver& solver, const Vec& x,
                                   const CVec& boundary_i) const;

    /// Derivative for a machine subset given precomputed currents.
    Vec assemble_rhs(const Vec& x, const MachineCurrents& cur) const;

private:
    AreaModel() = default;
    static AreaModel build(const PowerSystem& sys, const EquilibriumInit& init,
                           const std::vector<std::size_t>& machine_idx, AreaRole role,
                           const Partition* part);
    AreaRole role_ = AreaRole::Monolithic;
    StateLayout layout_;
    std::vector<GenBlock> gens_;
    std::vector<std::size_t> machine_idx_;           // into sys.machines
    std::vector<Eigen::Index> tie_to_boundary_;      // per tie: boundary node position
    std::vector<Eigen::Index> boundary_first_tie_;   // per boundary node: first tie index
};

/// Network snapshots for one area across the fault sequence. Fault clearing
/// restores the pre-fault network, so post aliases pre.
struct NetworkSet {
    ReducedNetwork pre;
    std::optional<ReducedNetwork> on;
    const ReducedNetwork& at(Snapshot s) const {
        if (s == Snapshot::OnFault) {
            if (!on) throw DimensionMismatch("no on-fault network built");
            return *on;
        }
        return pre;
    }
};

NetworkSet build_monolithic_networks(const PowerSystem& sys, const PowerFlowSolution& pf,
                                     const std::optional<FaultSpec>& fault);
NetworkSet build_study_networks(const PowerSystem& sys, const Partition& part,
                                const PowerFlowSolution& pf, const std::optional<FaultSpec>& fault);
NetworkSet build_external_networks(const PowerSystem& sys, const Partition& part,
                                   const PowerFlowSolution& pf);

/// Fixed-step RK4 over [0, t_end] with the network switching exactly at the
/// (grid-snapped) fault instants. Throws NumericalBlowup on non-finite state.
SimResult integrate_full(const PowerSystem& sys, const EquilibriumInit& init,
                         const PowerFlowSolution& pf, const std::optional<FaultSpec>& fault,
                         double t_end, double h);

/// Both areas in full detail, coupled by the once-per-step staggered
/// boundary exchange. Validates the exchange contract against the
/// monolithic run.
SimResult integrate_partitioned_full(const PowerSystem& sys, const Partition& part,
                                     const EquilibriumInit& init, const PowerFlowSolution& pf,
                                     const std::optional<FaultSpec>& fault, double t_end, double h);

/// Writes states.csv (t,gen<k>.<slot>,...) into `dir`.
void write_states_csv(const std::string& path, const StateLayout& layout, const SimResult& result);

/// Snaps an instant onto the step grid; records an event when it moved.
double snap_to_grid(double t, double h, const char* label, std::vector<Event>& events);

}  // namespace redgrid
