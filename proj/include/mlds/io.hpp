#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mlds/adaptive.hpp"
#include "mlds/metrics.hpp"

namespace mlds {

using nlohmann::json;

/// Full double precision: 17 significant digits everywhere in the outputs.
inline std::string fmt17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

/// Trajectory CSV: one row per step,
/// t, x_0..x_{d-1}, u_0.., w_0.., f_0.., prefix_x, prefix_f, epoch, phase.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    int d = traj.d;
    int p = static_cast<int>(traj.steps.empty() ? d : traj.steps[0].u.size());
    os << "t";
    for (int i = 0; i < d; ++i) os << ",x_" << i;
    for (int i = 0; i < p; ++i) os << ",u_" << i;
    for (int i = 0; i < d; ++i) os << ",w_" << i;
    for (int i = 0; i < d; ++i) os << ",f_" << i;
    os << ",prefix_x,prefix_f,epoch,phase\n";
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& s = traj.steps[t];
        os << s.t;
        for (int i = 0; i < d; ++i) os << "," << fmt17(s.x(i));
        for (int i = 0; i < p; ++i) os << "," << fmt17(s.u(i));
        for (int i = 0; i < d; ++i) os << "," << fmt17(s.w(i));
        for (int i = 0; i < d; ++i) os << "," << fmt17(s.f(i));
        os << "," << fmt17(traj.prefix_x[t]) << "," << fmt17(traj.prefix_f[t]) << ","
           << traj.epoch_of_step[t] << "," << traj.phase_of_step[t] << "\n";
    }
}

/// Controller event log as JSON lines.
inline void write_events_jsonl(std::ostream& os, const std::vector<ControllerEvent>& events) {
    for (const auto& e : events) {
        json j{{"t", e.t},
               {"event", e.event},
               {"q_old_log", e.q_old_log},
               {"q_new_log", e.q_new_log},
               {"phase", e.phase}};
        os << j.dump() << "\n";
    }
}

inline json gain_report_json(const GainReport& r) {
    json j;
    if (r.realized_gain) {
        j["realized_gain"] = *r.realized_gain;
    } else {
        j["realized_gain"] = "undefined";
    }
    j["realized_gain_log"] = r.realized_gain_log;
    j["certificate_log"] = r.certificate_log;
    j["epochs"] = r.epochs;
    j["switches"] = r.switches;
    j["cost_lqr"] = r.cost_lqr;
    json inv = json::array();
    for (const auto& i : r.invariant_results) {
        inv.push_back({{"name", i.name}, {"pass", i.pass}, {"margin", i.margin}});
    }
    j["invariants"] = inv;
    return j;
}

inline void write_invariants_csv(std::ostream& os, const std::vector<InvariantResult>& inv) {
    os << "invariant,pass,margin\n";
    for (const auto& i : inv) {
        os << i.name << "," << (i.pass ? 1 : 0) << "," << fmt17(i.margin) << "\n";
    }
}

}  // namespace mlds
