#include "redgrid/system_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace redgrid {

using nlohmann::json;

namespace {

double get_num(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ParseError(std::string("missing field \"") + key + "\"");
    }
    if (!j[key].is_number()) throw ParseError(std::string("field \"") + key + "\" is not a number");
    return j[key].get<double>();
}

int get_int(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw ParseError(std::string("missing or non-integer field \"") + key + "\"");
    return j[key].get<int>();
}

BusKind bus_kind_from_string(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "PV" || s == "pv") return BusKind::PV;
    if (s == "PQ" || s == "pq") return BusKind::PQ;
    throw ParseError("unknown bus kind \"" + s + "\"");
}

const char* bus_kind_name(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "PV";
        default: return "PQ";
    }
}

void require(bool cond, const char* field, const std::string& msg) {
    if (!cond) throw ValidationError(field, msg);
}

}  // namespace

StateCounts state_counts(const PowerSystem& sys, const Partition& part) {
    std::size_t ext_gens = 0;
    for (const auto& m : sys.machines)
        if (!is_study_bus(part, m.bus)) ++ext_gens;
    return {kSlotsPerGen * ext_gens, 2 * part.tie_lines.size()};
}

bool is_study_bus(const Partition& part, int bus_id) {
    return std::binary_search(part.study_buses.begin(), part.study_buses.end(), bus_id);
}

Partition resolve_partition(const PowerSystem& sys, const std::vector<int>& study_buses,
                            const std::vector<std::pair<int, int>>& tie_pairs) {
    Partition part;
    part.study_buses = study_buses;
    std::sort(part.study_buses.begin(), part.study_buses.end());
    part.study_buses.erase(std::unique(part.study_buses.begin(), part.study_buses.end()),
                           part.study_buses.end());
    for (int b : part.study_buses)
        require(sys.has_bus(b), "partition.study_buses", "unknown bus id " + std::to_string(b));

    // Match each declared tie pair to a distinct crossing branch.
    std::vector<bool> used(sys.branches.size(), false);
    for (const auto& [from, to] : tie_pairs) {
        bool matched = false;
        for (std::size_t i = 0; i < sys.branches.size(); ++i) {
            const auto& br = sys.branches[i];
            if (used[i] || br.status != BranchStatus::In) continue;
            const bool same = (br.from_bus == from && br.to_bus == to) ||
                              (br.from_bus == to && br.to_bus == from);
            if (!same) continue;
            used[i] = true;
            part.tie_lines.push_back(i);
            matched = true;
            break;
        }
        require(matched, "partition.tie_lines",
                "no in-service branch " + std::to_string(from) + "-" + std::to_string(to));
    }

    std::set<int> boundary;
    for (std::size_t idx : part.tie_lines) {
        const auto& br = sys.branches[idx];
        const bool from_study = is_study_bus(part, br.from_bus);
        const bool to_study = is_study_bus(part, br.to_bus);
        require(from_study != to_study, "partition.tie_lines",
                "tie line " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                    " must have exactly one study-side endpoint");
        boundary.insert(from_study ? br.from_bus : br.to_bus);
    }
    part.boundary_buses.assign(boundary.begin(), boundary.end());

    // Every crossing branch must be declared as a tie line, otherwise the
    // areas would be coupled outside the exchange contract.
    for (std::size_t i = 0; i < sys.branches.size(); ++i) {
        const auto& br = sys.branches[i];
        if (br.status != BranchStatus::In) continue;
        const bool crosses = is_study_bus(part, br.from_bus) != is_study_bus(part, br.to_bus);
        if (crosses && !used[i])
            throw ValidationError("partition.tie_lines",
                                  "branch " + std::to_string(br.from_bus) + "-" +
                                      std::to_string(br.to_bus) + " crosses the boundary but is not a tie line");
    }
    return part;
}

void validate_system(const PowerSystem& sys) {
    require(!sys.buses.empty(), "buses", "at least one bus required");
    require(sys.base_mva > 0, "base_mva", "must be positive");

    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : sys.buses) {
        require(ids.insert(b.id).second, "buses.id", "duplicate bus id " + std::to_string(b.id));
        require(b.voltage_mag > 0, "voltage_mag",
                "bus " + std::to_string(b.id) + " must have voltage_mag > 0");
        if (b.kind == BusKind::Slack) ++slack_count;
    }
    require(slack_count == 1, "buses.kind", "exactly one slack bus required, found " +
                                                std::to_string(slack_count));

    for (const auto& br : sys.branches) {
        require(br.x != 0.0, "x", "branch " + std::to_string(br.from_bus) + "-" +
                                      std::to_string(br.to_bus) + " must have x != 0");
        require(br.from_bus != br.to_bus, "from_bus",
                "branch endpoints must differ (bus " + std::to_string(br.from_bus) + ")");
        require(sys.has_bus(br.from_bus) && sys.has_bus(br.to_bus), "branches",
                "branch references unknown bus");
        require(br.tap_ratio > 0, "tap_ratio", "must be positive");
    }

    require(sys.machines.size() == sys.exciters.size() &&
                sys.machines.size() == sys.governors.size(),
            "machines", "machines, exciters and governors must align one-to-one");

    std::set<int> gen_buses;
    for (std::size_t i = 0; i < sys.machines.size(); ++i) {
        const auto& m = sys.machines[i];
        const std::string at = " (machine at bus " + std::to_string(m.bus) + ")";
        require(sys.has_bus(m.bus), "machines.bus", "unknown bus id " + std::to_string(m.bus));
        require(gen_buses.insert(m.bus).second, "machines.bus", "multiple machines at one bus" + at);
        require(m.H > 0, "H", "must be > 0" + at);
        require(m.Td0_p > 0, "Td0_p", "must be > 0" + at);
        require(m.Tq0_p > 0, "Tq0_p", "must be > 0" + at);
        require(m.Xd_p > 0 && m.Xd >= m.Xd_p, "Xd", "need Xd >= Xd_p > 0" + at);
        require(m.Xq_p > 0 && m.Xq >= m.Xq_p, "Xq", "need Xq >= Xq_p > 0" + at);
        const auto kind = sys.buses[sys.bus_index(m.bus)].kind;
        require(kind != BusKind::PQ, "machines.bus", "machine bus must be slack or PV" + at);

        const auto& e = sys.exciters[i];
        require(e.TA > 0 && e.TE > 0 && e.TF > 0, "TA", "exciter time constants must be > 0" + at);
        require(e.VR_max > e.VR_min, "VR_max", "need VR_max > VR_min" + at);

        const auto& g = sys.governors[i];
        require(g.TSV > 0 && g.TCH > 0, "TSV", "governor/turbine time constants must be > 0" + at);
        require(g.RD > 0, "RD", "must be > 0" + at);
        require(g.P_sv_max > g.P_sv_min, "P_sv_max", "need P_sv_max > P_sv_min" + at);
    }

    if (sys.partition) {
        const auto& part = *sys.partition;
        require(!part.study_buses.empty(), "partition.study_buses", "study area is empty");
        std::size_t ext = 0;
        for (const auto& b : sys.buses)
            if (!is_study_bus(part, b.id)) ++ext;
        require(ext > 0, "partition.study_buses", "external area is empty");
    }
}

PowerSystem load_system_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
    if (!j.is_object()) throw ParseError("top level must be an object");

    PowerSystem sys;
    sys.base_mva = get_num(j, "base_mva", 100.0);

    if (!j.contains("buses") || !j["buses"].is_array()) throw ParseError("missing \"buses\" array");
    for (const auto& jb : j["buses"]) {
        Bus b;
        b.id = get_int(jb, "id");
        b.kind = bus_kind_from_string(jb.value("kind", std::string("PQ")));
        b.voltage_mag = get_num(jb, "voltage_mag", 1.0);
        b.voltage_ang = get_num(jb, "voltage_ang", 0.0);
        b.p_load = get_num(jb, "p_load", 0.0);
        b.q_load = get_num(jb, "q_load", 0.0);
        b.shunt_g = get_num(jb, "shunt_g", 0.0);
        b.shunt_b = get_num(jb, "shunt_b", 0.0);
        sys.buses.push_back(b);
    }
    std::sort(sys.buses.begin(), sys.buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });

    for (const auto& jb : j.value("branches", json::array())) {
        Branch br;
        br.from_bus = get_int(jb, "from");
        br.to_bus = get_int(jb, "to");
        br.r = get_num(jb, "r", 0.0);
        br.x = get_num(jb, "x");
        br.b_charging = get_num(jb, "b", 0.0);
        br.tap_ratio = get_num(jb, "tap", 1.0);
        br.status = jb.value("status", std::string("in")) == "out" ? BranchStatus::Out : BranchStatus::In;
        sys.branches.push_back(br);
    }

    struct Controllers {
        std::optional<ExciterIEEE1> exc;
        std::optional<GovernorTurbine> gov;
    };
    std::map<int, Controllers> ctrl;

    for (const auto& je : j.value("exciters", json::array())) {
        ExciterIEEE1 e;
        const int bus = get_int(je, "bus");
        e.KA = get_num(je, "KA");
        e.TA = get_num(je, "TA");
        e.KE = get_num(je, "KE");
        e.TE = get_num(je, "TE");
        e.KF = get_num(je, "KF");
        e.TF = get_num(je, "TF");
        e.VR_max = get_num(je, "VR_max");
        e.VR_min = get_num(je, "VR_min");
        e.SE_a = get_num(je, "SE_a", 0.0);
        e.SE_b = get_num(je, "SE_b", 0.0);
        e.V_ref = get_num(je, "V_ref", 1.0);
        ctrl[bus].exc = e;
    }
    for (const auto& jg : j.value("governors", json::array())) {
        GovernorTurbine g;
        const int bus = get_int(jg, "bus");
        g.RD = get_num(jg, "RD");
        g.TSV = get_num(jg, "TSV");
        g.TCH = get_num(jg, "TCH");
        g.P_sv_max = get_num(jg, "P_sv_max", 10.0);
        g.P_sv_min = get_num(jg, "P_sv_min", 0.0);
        g.P_ref = get_num(jg, "P_ref", 0.0);
        ctrl[bus].gov = g;
    }

    for (const auto& jm : j.value("machines", json::array())) {
        Machine m;
        m.bus = get_int(jm, "bus");
        m.mva_base = get_num(jm, "mva_base", sys.base_mva);
        m.H = get_num(jm, "H");
        m.D = get_num(jm, "D", 0.0);
        m.Xd = get_num(jm, "Xd");
        m.Xd_p = get_num(jm, "Xd_p");
        m.Xq = get_num(jm, "Xq");
        m.Xq_p = get_num(jm, "Xq_p");
        m.Td0_p = get_num(jm, "Td0_p");
        m.Tq0_p = get_num(jm, "Tq0_p");
        m.Ra = get_num(jm, "Ra", 0.0);
        m.p_gen = get_num(jm, "p_gen", 0.0);

        // Rebase from machine MVA base to system base.
        const double z = sys.base_mva / m.mva_base;  // impedance scale
        m.Xd *= z;
        m.Xd_p *= z;
        m.Xq *= z;
        m.Xq_p *= z;
        m.Ra *= z;
        m.H /= z;  // inertia and damping scale with machine rating
        m.D /= z;

        auto it = ctrl.find(m.bus);
        if (it == ctrl.end() || !it->second.exc || !it->second.gov)
            throw ValidationError("machines",
                                  "machine at bus " + std::to_string(m.bus) +
                                      " needs both an exciter and a governor entry");
        GovernorTurbine g = *it->second.gov;
        g.RD *= z;  // droop is pu-frequency per pu-power; rebasing power rescales it
        g.P_sv_max /= z;
        g.P_sv_min /= z;
        g.P_ref /= z;

        sys.machines.push_back(m);
        sys.exciters.push_back(*it->second.exc);
        sys.governors.push_back(g);
    }

    // Generator ordering inside the state vector: ascending bus id.
    std::vector<std::size_t> order(sys.machines.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sys.machines[a].bus < sys.machines[b].bus; });
    auto permute = [&](auto& v) {
        auto copy = v;
        for (std::size_t i = 0; i < order.size(); ++i) v[i] = copy[order[i]];
    };
    permute(sys.machines);
    permute(sys.exciters);
    permute(sys.governors);

    if (j.contains("partition")) {
        const auto& jp = j["partition"];
        std::vector<int> study;
        for (const auto& v : jp.value("study_buses", json::array())) study.push_back(v.get<int>());
        std::vector<std::pair<int, int>> ties;
        for (const auto& v : jp.value("tie_lines", json::array())) {
            if (!v.is_array() || v.size() != 2) throw ParseError("tie_lines entries must be [from,to]");
            ties.emplace_back(v[0].get<int>(), v[1].get<int>());
        }
        sys.partition = resolve_partition(sys, study, ties);
    }

    validate_system(sys);
    return sys;
}

PowerSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_system_from_string(ss.str());
}

std::string serialize_system(const PowerSystem& sys) {
    json j;
    j["base_mva"] = sys.base_mva;
    j["buses"] = json::array();
    for (const auto& b : sys.buses) {
        j["buses"].push_back({{"id", b.id},
                              {"kind", bus_kind_name(b.kind)},
                              {"voltage_mag", b.voltage_mag},
                              {"voltage_ang", b.voltage_ang},
                              {"p_load", b.p_load},
                              {"q_load", b.q_load},
                              {"shunt_g", b.shunt_g},
                              {"shunt_b", b.shunt_b}});
    }
    j["branches"] = json::array();
    for (const auto& br : sys.branches) {
        j["branches"].push_back({{"from", br.from_bus},
                                 {"to", br.to_bus},
                                 {"r", br.r},
                                 {"x", br.x},
                                 {"b", br.b_charging},
                                 {"tap", br.tap_ratio},
                                 {"status", br.status == BranchStatus::In ? "in" : "out"}});
    }
    j["machines"] = json::array();
    j["exciters"] = json::array();
    j["governors"] = json::array();
    for (std::size_t i = 0; i < sys.machines.size(); ++i) {
        const auto& m = sys.machines[i];
        // Parameters are already on the system base; emit them as such.
        j["machines"].push_back({{"bus", m.bus},
                                 {"mva_base", sys.base_mva},
                                 {"H", m.H},
                                 {"D", m.D},
                                 {"Xd", m.Xd},
                                 {"Xd_p", m.Xd_p},
                                 {"Xq", m.Xq},
                                 {"Xq_p", m.Xq_p},
                                 {"Td0_p", m.Td0_p},
                                 {"Tq0_p", m.Tq0_p},
                                 {"Ra", m.Ra},
                                 {"p_gen", m.p_gen}});
        const auto& e = sys.exciters[i];
        j["exciters"].push_back({{"bus", m.bus},
                                 {"KA", e.KA},
                                 {"TA", e.TA},
                                 {"KE", e.KE},
                                 {"TE", e.TE},
                                 {"KF", e.KF},
                                 {"TF", e.TF},
                                 {"VR_max", e.VR_max},
                                 {"VR_min", e.VR_min},
                                 {"SE_a", e.SE_a},
                                 {"SE_b", e.SE_b},
                                 {"V_ref", e.V_ref}});
        const auto& g = sys.governors[i];
        j["governors"].push_back({{"bus", m.bus},
                                  {"RD", g.RD},
                                  {"TSV", g.TSV},
                                  {"TCH", g.TCH},
                                  {"P_sv_max", g.P_sv_max},
                                  {"P_sv_min", g.P_sv_min},
                                  {"P_ref", g.P_ref}});
    }
    if (sys.partition) {
        const auto& p = *sys.partition;
        json jp;
        jp["study_buses"] = p.study_buses;
        jp["tie_lines"] = json::array();
        for (std::size_t idx : p.tie_lines)
            jp["tie_lines"].push_back({sys.branches[idx].from_bus, sys.branches[idx].to_bus});
        j["partition"] = jp;
    }
    return j.dump(2);
}

FaultSpec load_fault_from_string(const std::string& text, double t_end) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
    FaultSpec f;
    f.bus = get_int(j, "bus");
    f.t_on = get_num(j, "t_on");
    f.t_clear = get_num(j, "t_clear");
    f.kind = j.value("kind", std::string("3ph"));
    if (f.kind != "3ph") throw ValidationError("kind", "only \"3ph\" faults are supported");
    if (!(0.0 <= f.t_on && f.t_on < f.t_clear && (t_end <= 0.0 || f.t_clear <= t_end)))
        throw ValidationError("t_on", "need 0 <= t_on < t_clear <= t_end");
    return f;
}

FaultSpec load_fault(const std::string& path, double t_end) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_fault_from_string(ss.str(), t_end);
}

std::string serialize_fault(const FaultSpec& f) {
    json j{{"bus", f.bus}, {"t_on", f.t_on}, {"t_clear", f.t_clear}, {"kind", f.kind}};
    return j.dump(2);
}

bool systems_equal(const PowerSystem& a, const PowerSystem& b) {
    auto eq = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)}); };
    if (a.base_mva != b.base_mva || a.buses.size() != b.buses.size() ||
        a.branches.size() != b.branches.size() || a.machines.size() != b.machines.size())
        return false;
    for (std::size_t i = 0; i < a.buses.size(); ++i) {
        const auto &x = a.buses[i], &y = b.buses[i];
        if (x.id != y.id || x.kind != y.kind || !eq(x.voltage_mag, y.voltage_mag) ||
            !eq(x.voltage_ang, y.voltage_ang) || !eq(x.p_load, y.p_load) || !eq(x.q_load, y.q_load) ||
            !eq(x.shunt_g, y.shunt_g) || !eq(x.shunt_b, y.shunt_b))
            return false;
    }
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
        const auto &x = a.branches[i], &y = b.branches[i];
        if (x.from_bus != y.from_bus || x.to_bus != y.to_bus || !eq(x.r, y.r) || !eq(x.x, y.x) ||
            !eq(x.b_charging, y.b_charging) || !eq(x.tap_ratio, y.tap_ratio) || x.status != y.status)
            return false;
    }
    for (std::size_t i = 0; i < a.machines.size(); ++i) {
        const auto &x = a.machines[i], &y = b.machines[i];
        if (x.bus != y.bus || !eq(x.H, y.H) || !eq(x.D, y.D) || !eq(x.Xd, y.Xd) ||
            !eq(x.Xd_p, y.Xd_p) || !eq(x.Xq, y.Xq) || !eq(x.Xq_p, y.Xq_p) || !eq(x.Td0_p, y.Td0_p) ||
            !eq(x.Tq0_p, y.Tq0_p) || !eq(x.Ra, y.Ra) || !eq(x.p_gen, y.p_gen))
            return false;
        const auto &ea = a.exciters[i], &eb = b.exciters[i];
        if (!eq(ea.KA, eb.KA) || !eq(ea.TA, eb.TA) || !eq(ea.KE, eb.KE) || !eq(ea.TE, eb.TE) ||
            !eq(ea.KF, eb.KF) || !eq(ea.TF, eb.TF) || !eq(ea.VR_max, eb.VR_max) ||
            !eq(ea.VR_min, eb.VR_min) || !eq(ea.SE_a, eb.SE_a) || !eq(ea.SE_b, eb.SE_b))
            return false;
        const auto &ga = a.governors[i], &gb = b.governors[i];
        if (!eq(ga.RD, gb.RD) || !eq(ga.TSV, gb.TSV) || !eq(ga.TCH, gb.TCH) ||
            !eq(ga.P_sv_max, gb.P_sv_max) || !eq(ga.P_sv_min, gb.P_sv_min))
            return false;
    }
    if (a.partition.has_value() != b.partition.has_value()) return false;
    if (a.partition) {
        if (a.partition->study_buses != b.partition->study_buses ||
            a.partition->tie_lines != b.partition->tie_lines)
            return false;
    }
    return true;
}

}  // namespace redgrid
