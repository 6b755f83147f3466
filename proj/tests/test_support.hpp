#pragma once

#include <string>

#include "redgrid/system_io.hpp"

namespace redgrid::testsupport {

inline std::string data_path(const std::string& name) {
    return std::string(REDGRID_DATA_DIR) + "/" + name;
}

inline PowerSystem load_ieee9() { return load_system(data_path("ieee9.json")); }
inline PowerSystem load_two_area() { return load_system(data_path("two_area.json")); }

/// Two-bus toy: slack feeding a PQ load over one lossless line.
inline PowerSystem two_bus(double p_load, double x_line, double q_load = 0.0) {
    const std::string text = R"({
      "base_mva": 100.0,
      "buses": [
        {"id": 1, "kind": "slack", "voltage_mag": 1.0, "voltage_ang": 0.0},
        {"id": 2, "kind": "PQ", "p_load": )" + std::to_string(p_load) +
                             R"(, "q_load": )" + std::to_string(q_load) + R"(}
      ],
      "branches": [{"from": 1, "to": 2, "r": 0.0, "x": )" + std::to_string(x_line) + R"(}],
      "machines": [], "exciters": [], "governors": []
    })";
    return load_system_from_string(text);
}

/// Replicates the external area of the two-area system `copies` times, each
/// replica tied to the same study boundary bus, with a small parameter
/// ramp so replica modes stay distinct. Used for scaling experiments.
PowerSystem replicate_external(const PowerSystem& base, int copies);

}  // namespace redgrid::testsupport
