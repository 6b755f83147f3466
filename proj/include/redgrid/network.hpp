#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "redgrid/types.hpp"

namespace redgrid {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Snapshot { PreFault, OnFault, PostFault };

/// Default fault shunt conductance, pu. Large enough to pin the faulted bus
/// voltage near zero while keeping the matrix dimensions fixed.
inline constexpr double kFaultConductance = 1e6;

/// Bus admittance matrix over the given bus set. Rows/columns follow the
/// order of `bus_ids`. Branch pi-models, taps, bus shunts and (optionally)
/// constant-admittance loads are included. `load_voltage` supplies the bus
/// voltage magnitudes at which loads are converted (usually the power flow
/// solution); loads are skipped when it is empty.
CMat build_ybus(const PowerSystem& sys, const std::vector<int>& bus_ids, Snapshot snapshot,
                const std::optional<FaultSpec>& fault, const std::vector<double>& load_voltage);

/// Kron reduction: Y_red = Y_rr - Y_re * Y_ee^{-1} * Y_er. `retained` holds
/// row indices into Y. Throws SingularBlock when the eliminated block cannot
/// be factored.
CMat kron_reduce(const CMat& Y, const std::vector<Eigen::Index>& retained);

/// A dynamic-simulation network snapshot reduced to machine internal nodes
/// (and boundary buses for partitioned areas). Node order: machines first,
/// in state-layout order, then boundary buses.
struct ReducedNetwork {
    CMat Y;                        // dense admittance over retained nodes
    std::size_t n_machine = 0;     // leading machine nodes
    std::size_t n_boundary = 0;    // trailing boundary-bus nodes
    Snapshot snapshot = Snapshot::PreFault;

    Eigen::Index size() const { return Y.rows(); }
};

/// Per-tie-line boundary voltages seen by the external area (its input u,
/// ordered theta1, V1, theta2, V2, ...) and per-boundary-bus current
/// injections from the external area into the study area.
struct BoundaryExchange {
    Vec tie_inputs;       // 2 * N_tie
    CVec bus_currents;    // N_boundary, into the study area
};

/// Machine interface quantities produced by the network solve.
struct MachineCurrents {
    Vec Id, Iq;       // machine dq currents, generator convention (out of machine)
    Vec Vt;           // terminal voltage magnitude
    CVec I_net;       // machine currents in network coordinates
    CVec E_eff;       // effective internal EMFs including the saliency correction
};

/// Machine quantities entering the algebraic network solve.
struct MachineEmf {
    double delta = 0.0;  // rotor angle, rad
    double Edp = 0.0;
    double Eqp = 0.0;
};

class NetworkSolver;

/// Precomputed per-machine constants for the algebraic interface.
struct MachineInterface {
    double Ra = 0.0;
    double Xd_p = 0.0;
    double Xq_p = 0.0;
    double sal = 0.0;  // Xq_p - Xd_p, the dummy-coil correction gain
};

/// Solves the reduced-network node equations for machine currents given
/// internal EMF states. Saliency (Xd_p != Xq_p) enters through a correction
/// current solved simultaneously, so the result is exact for the two-axis
/// stator equations.
///
/// Three coupling roles share this solver:
///  - monolithic: no boundary nodes;
///  - external area: boundary node voltages are known inputs, boundary
///    currents are reported outputs;
///  - study area: boundary currents are known injections, boundary voltages
///    are solved for.
class NetworkSolver {
public:
    NetworkSolver(const ReducedNetwork* net, std::vector<MachineInterface> machines);

    /// Monolithic / external role: all retained node voltages known.
    /// `boundary_v` holds complex boundary-bus voltages (empty when none).
    MachineCurrents solve_with_boundary_voltages(const std::vector<MachineEmf>& emf,
                                                 const CVec& boundary_v,
                                                 CVec* boundary_currents = nullptr) const;

    /// Study role: boundary currents injected by the neighbour are known,
    /// boundary voltages are unknowns.
    MachineCurrents solve_with_boundary_currents(const std::vector<MachineEmf>& emf,
                                                 const CVec& boundary_i,
                                                 CVec* boundary_voltages = nullptr) const;

    /// Hybrid variant: machines in `exact` get the full saliency treatment;
    /// the rest contribute as EMF sources with their correction current
    /// frozen at `iq_frozen` (their equilibrium q-axis current). Only the
    /// exact machines' currents are returned (others zero-filled).
    MachineCurrents solve_partial(const std::vector<MachineEmf>& emf, const CVec& boundary_v,
                                  const std::vector<std::size_t>& exact, const Vec& iq_frozen,
                                  CVec* boundary_currents = nullptr) const;

    const ReducedNetwork& net() const { return *net_; }

private:
    const ReducedNetwork* net_;
    std::vector<MachineInterface> machines_;
};

/// Helper shared by the solver and equilibrium init: rotates a machine
/// dq-frame phasor into network coordinates (dq frame leads by delta - pi/2).
inline Complex dq_to_network(double delta, Complex dq) {
    return dq * std::polar(1.0, delta - 3.14159265358979323846 / 2.0);
}

inline Complex network_to_dq(double delta, Complex net) {
    return net * std::polar(1.0, -(delta - 3.14159265358979323846 / 2.0));
}

/// Boundary-boundary admittance block of a reduced network (the area's
/// passive driving-point response seen from the boundary buses).
CMat boundary_block(const ReducedNetwork& net);

/// Embeds a neighbour's boundary block as a constant shunt. The study area
/// carries the external area's passive network this way, so the per-step
/// exchange only lags the neighbour's internal EMF sources, which keeps the
/// staggered co-simulation stable.
void add_boundary_admittance(ReducedNetwork& net, const CMat& Yb);

/// Recovers the full bus voltage profile from effective machine EMFs, for
/// snapshotting boundary quantities mid-simulation. Bus rows follow
/// sys.buses order.
class BusVoltageSolver {
public:
    BusVoltageSolver(const PowerSystem& sys, Snapshot snapshot,
                     const std::optional<FaultSpec>& fault, const std::vector<double>& load_voltage);
    CVec solve(const CVec& machine_E_eff) const;

private:
    Eigen::PartialPivLU<CMat> lu_;  // of the bus block
    CMat Ybi_;                      // bus-to-internal coupling
};

/// Ids of all buses in layout order, and the subsets backing partitioned runs.
std::vector<int> all_bus_ids(const PowerSystem& sys);
std::vector<int> study_bus_ids(const PowerSystem& sys, const Partition& part);
std::vector<int> external_bus_ids(const PowerSystem& sys, const Partition& part);

/// Builds the reduced network for one of the three roles. `load_voltage` is
/// indexed like `sys.buses` (all buses), from the power flow solution.
ReducedNetwork build_monolithic_network(const PowerSystem& sys, Snapshot snapshot,
                                        const std::optional<FaultSpec>& fault,
                                        const std::vector<double>& load_voltage);
ReducedNetwork build_study_network(const PowerSystem& sys, const Partition& part, Snapshot snapshot,
                                   const std::optional<FaultSpec>& fault,
                                   const std::vector<double>& load_voltage);
ReducedNetwork build_external_network(const PowerSystem& sys, const Partition& part,
                                      const std::vector<double>& load_voltage);

std::vector<MachineInterface> machine_interfaces(const PowerSystem& sys);
std::vector<MachineInterface> machine_interfaces_subset(const PowerSystem& sys,
                                                        const std::vector<std::size_t>& machine_idx);

/// Machines (indices into sys.machines) on the study / external side.
std::vector<std::size_t> study_machines(const PowerSystem& sys, const Partition& part);
std::vector<std::size_t> external_machines(const PowerSystem& sys, const Partition& part);

}  // namespace redgrid
