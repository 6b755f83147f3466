#include "redgrid/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace redgrid {

AdaptiveConfig RunConfig::adaptive(ReductionMethod method) const {
    AdaptiveConfig cfg;
    cfg.method = method;
    cfg.p_max = p_max;
    cfg.delta_threshold = delta_threshold_deg * M_PI / 180.0;
    cfg.dominant_count = dominant_count;
    cfg.f_max = f_max;
    cfg.h = h;
    cfg.t_end = t_end;
    cfg.truncate_linear = truncate_linear;
    cfg.truncate_hybrid = truncate_hybrid;
    cfg.bt_tol = bt_tol;
    return cfg;
}

RunConfig run_config_from_string(const std::string& text, const RunConfig& base) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }
    if (!j.is_object()) throw ParseError("config must be a JSON object");

    static const std::set<std::string> known = {
        "h",         "t_end",         "p_max",          "delta_threshold_deg",
        "dominant_count", "f_max",    "bt_tol",         "truncate_linear",
        "truncate_hybrid", "pf_tol",  "pf_max_iter",    "timing_repeats"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ValidationError("config." + key, "unknown configuration key");

    RunConfig cfg = base;
    cfg.h = j.value("h", cfg.h);
    cfg.t_end = j.value("t_end", cfg.t_end);
    cfg.p_max = j.value("p_max", cfg.p_max);
    cfg.delta_threshold_deg = j.value("delta_threshold_deg", cfg.delta_threshold_deg);
    cfg.dominant_count = j.value("dominant_count", cfg.dominant_count);
    cfg.f_max = j.value("f_max", cfg.f_max);
    cfg.bt_tol = j.value("bt_tol", cfg.bt_tol);
    cfg.truncate_linear = j.value("truncate_linear", cfg.truncate_linear);
    cfg.truncate_hybrid = j.value("truncate_hybrid", cfg.truncate_hybrid);
    cfg.pf_tol = j.value("pf_tol", cfg.pf_tol);
    cfg.pf_max_iter = j.value("pf_max_iter", cfg.pf_max_iter);
    cfg.timing_repeats = j.value("timing_repeats", cfg.timing_repeats);

    if (cfg.h <= 0) throw ValidationError("config.h", "must be positive");
    if (cfg.t_end <= 0) throw ValidationError("config.t_end", "must be positive");
    if (cfg.p_max <= 0) throw ValidationError("config.p_max", "must be positive");
    if (cfg.dominant_count < 1) throw ValidationError("config.dominant_count", "must be >= 1");
    return cfg;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_string(ss.str(), base);
}

}  // namespace redgrid
