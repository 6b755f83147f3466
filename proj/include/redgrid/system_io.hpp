#pragma once

#include <string>

#include "redgrid/types.hpp"

namespace redgrid {

/// Parses and validates a system file. Machine parameters are rebased to the
/// system MVA base, machines are sorted by bus id, and the partition (when
/// present) is checked for consistency. Throws ParseError or ValidationError.
PowerSystem load_system(const std::string& path);

/// Same, from an in-memory JSON document.
PowerSystem load_system_from_string(const std::string& text);

/// Serializes in the same schema accepted by load_system. Round-trips:
/// parsing the output yields an equal PowerSystem.
std::string serialize_system(const PowerSystem& sys);

FaultSpec load_fault(const std::string& path, double t_end);
FaultSpec load_fault_from_string(const std::string& text, double t_end);
std::string serialize_fault(const FaultSpec& fault);

bool systems_equal(const PowerSystem& a, const PowerSystem& b);

/// Validates all type invariants; called by load_system, usable on
/// programmatically built systems too.
void validate_system(const PowerSystem& sys);

/// Builds the derived partition fields (tie branch indices, boundary buses)
/// from study_buses alone, or validates explicit tie lists.
Partition resolve_partition(const PowerSystem& sys, const std::vector<int>& study_buses,
                            const std::vector<std::pair<int, int>>& tie_pairs);

}  // namespace redgrid
