#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "redgrid/errors.hpp"

namespace redgrid {

/// Synchronous frequency, rad/s (60 Hz system).
inline constexpr double kOmegaSync = 2.0 * 3.14159265358979323846 * 60.0;

enum class BusKind { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double voltage_mag = 1.0;  // pu; setpoint for slack/PV, initial guess for PQ
    double voltage_ang = 0.0;  // rad; fixed for slack
    double p_load = 0.0;       // pu on system base
    double q_load = 0.0;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
};

enum class BranchStatus { In, Out };

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;  // pu series
    double x = 0.0;
    double b_charging = 0.0;  // total line charging, pu
    double tap_ratio = 1.0;   // on the from side
    BranchStatus status = BranchStatus::In;
};

/// Two-axis machine parameters. Stored on the system MVA base after load.
struct Machine {
    int bus = 0;
    double mva_base = 100.0;  // original machine base, kept for reporting
    double H = 0.0;           // s
    double D = 0.0;           // pu damping torque coefficient
    double Xd = 0.0, Xd_p = 0.0;
    double Xq = 0.0, Xq_p = 0.0;
    double Td0_p = 0.0, Tq0_p = 0.0;  // s
    double Ra = 0.0;
    double p_gen = 0.0;  // pu dispatch on system base (used at PV buses)
};

struct ExciterIEEE1 {
    double KA = 20.0, TA = 0.2;
    double KE = 1.0, TE = 0.314;
    double KF = 0.063, TF = 0.35;
    double VR_max = 5.0, VR_min = -5.0;
    double SE_a = 0.0, SE_b = 0.0;  // saturation SE(Efd) = SE_a * exp(SE_b * Efd)
    double V_ref = 1.0;             // back-computed at equilibrium init
};

struct GovernorTurbine {
    double RD = 0.05;  // pu droop
    double TSV = 0.2;  // s, governor
    double TCH = 0.5;  // s, turbine
    double P_sv_max = 10.0, P_sv_min = 0.0;
    double P_ref = 0.0;  // back-computed at equilibrium init
};

struct FaultSpec {
    int bus = 0;
    double t_on = 0.0;
    double t_clear = 0.0;
    std::string kind = "3ph";
};

/// Study/external split. tie_lines holds indices into PowerSystem::branches;
/// every tie line has exactly one endpoint in the study set.
struct Partition {
    std::vector<int> study_buses;         // sorted bus ids
    std::vector<std::size_t> tie_lines;   // branch indices crossing the boundary
    std::vector<int> boundary_buses;      // study-side endpoints of tie lines, sorted, deduped
};

/// Per-generator state slots in their fixed order. The flat state vector is
/// the concatenation of these 9 slots per generator, generators ordered by
/// ascending bus id.
enum class Slot : int {
    Delta = 0,
    Pm = 1,
    Pgv = 2,
    VR = 3,
    Rf = 4,
    Efd = 5,
    Edp = 6,
    Eqp = 7,
    Omega = 8,
};

inline constexpr int kSlotsPerGen = 9;

inline constexpr std::array<const char*, kSlotsPerGen> kSlotNames = {
    "delta", "Pm", "Pgv", "VR", "Rf", "Efd", "Edp", "Eqp", "omega"};

/// Bijection between flat state indices and (generator, slot) pairs.
class StateLayout {
public:
    StateLayout() = default;
    explicit StateLayout(std::size_t n_gen) : n_gen_(n_gen) {}

    std::size_t gen_count() const { return n_gen_; }
    std::size_t size() const { return n_gen_ * kSlotsPerGen; }

    std::size_t index_of(std::size_t gen, Slot slot) const {
        if (gen >= n_gen_) throw DimensionMismatch("generator index out of range");
        return gen * kSlotsPerGen + static_cast<std::size_t>(slot);
    }

    std::size_t index_of(std::size_t gen, const std::string& slot_name) const {
        return index_of(gen, slot_from_name(slot_name));
    }

    std::pair<std::size_t, Slot> locate(std::size_t flat_index) const {
        if (flat_index >= size()) throw DimensionMismatch("state index out of range");
        return {flat_index / kSlotsPerGen, static_cast<Slot>(flat_index % kSlotsPerGen)};
    }

    static Slot slot_from_name(const std::string& name) {
        for (int s = 0; s < kSlotsPerGen; ++s)
            if (name == kSlotNames[static_cast<std::size_t>(s)]) return static_cast<Slot>(s);
        throw UnknownSlot(name);
    }

    static const char* slot_name(Slot s) { return kSlotNames[static_cast<std::size_t>(static_cast<int>(s))]; }

private:
    std::size_t n_gen_ = 0;
};

/// Immutable after load; safe to share read-only across threads.
struct PowerSystem {
    double base_mva = 100.0;
    std::vector<Bus> buses;               // sorted by id
    std::vector<Branch> branches;
    std::vector<Machine> machines;        // sorted by bus id; parameters on system base
    std::vector<ExciterIEEE1> exciters;   // aligned with machines
    std::vector<GovernorTurbine> governors;
    std::optional<Partition> partition;

    std::size_t bus_index(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return i;
        throw ValidationError("bus", "unknown bus id " + std::to_string(bus_id));
    }

    bool has_bus(int bus_id) const {
        for (const auto& b : buses)
            if (b.id == bus_id) return true;
        return false;
    }

    StateLayout layout() const { return StateLayout(machines.size()); }
};

struct StateCounts {
    std::size_t n_state = 0;
    std::size_t n_in = 0;
};

/// N_state = 9 * (external generator count), N_in = 2 * N_tie.
StateCounts state_counts(const PowerSystem& sys, const Partition& part);

/// True if the bus belongs to the study side of the partition.
bool is_study_bus(const Partition& part, int bus_id);

}  // namespace redgrid
