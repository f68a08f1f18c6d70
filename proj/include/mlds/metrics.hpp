#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mlds/adaptive.hpp"
#include "mlds/exploration.hpp"
#include "mlds/lds.hpp"
#include "mlds/logspace.hpp"

namespace mlds {

struct InvariantResult {
    std::string name;
    bool pass;
    double margin;
};

/// Measurement summary of one closed-loop run. An undefined gain (f == 0
/// throughout) is a first-class value, never a NaN.
struct GainReport {
    std::optional<double> realized_gain;  // nullopt = undefined (0/0)
    double realized_gain_log = kNegInf;
    double certificate_log = kNegInf;
    int epochs = 0;
    int switches = 0;
    std::vector<InvariantResult> invariant_results;
    double cost_lqr = 0.0;  // sum ||x||^2 + ||u||^2
};

/// ||x_{1:T}||_2 / ||f_{0:T-1}||_2; undefined when the denominator is 0.
inline std::optional<double> l2_gain(const Trajectory& traj) {
    int T = traj.horizon();
    if (T < 1) return std::nullopt;
    double fe = traj.prefix_f[T - 1];
    if (fe == 0.0) return std::nullopt;
    return traj.prefix_x[T] / fe;
}

/// Same ratio in log space, for runs whose energies overflow doubles.
inline std::optional<double> l2_gain_log(const Trajectory& traj) {
    int T = traj.horizon();
    if (T < 1) return std::nullopt;
    double fe_log = traj.prefix_f_log[T - 1];
    if (fe_log == kNegInf) return std::nullopt;
    return traj.prefix_x_log[T] - fe_log;
}

struct RobustnessCheck {
    bool pass = true;
    int first_violation_t = -1;
    double worst_margin = kNegInf;  // max over t of ||w_{0:t}|| - h ||x_{1:t}||
};

/// Verifies the misspecification budget ||w_{0:t}||_2 <= h ||x_{1:t}||_2
/// at every prefix.
inline RobustnessCheck robustness_check(const Trajectory& traj, double h) {
    RobustnessCheck out;
    for (int t = 0; t <= traj.horizon(); ++t) {
        double margin = traj.prefix_w[t] - h * traj.prefix_x[t];
        out.worst_margin = std::max(out.worst_margin, margin);
        if (margin > 1e-9 * std::max(1.0, h * traj.prefix_x[t]) && out.pass) {
            out.pass = false;
            out.first_violation_t = t;
        }
    }
    return out;
}

/// Offline-optimum sandwich under cost ||x||^2 + ||u||^2 with h < 1/2:
/// ||f||^2 / (9 M^2) <= OPT <= 8 M^2 ||f||^2 / L^2.
inline std::pair<double, double> opt_bounds(double f_energy, double M, double L) {
    double fsq = f_energy * f_energy;
    return {fsq / (9.0 * M * M), 8.0 * M * M * fsq / (L * L)};
}

/// sum_t ||x_t||^2 + ||u_t||^2 over the recorded steps.
inline double lqr_cost(const Trajectory& traj) {
    double c = 0.0;
    for (const auto& s : traj.steps) c += s.x.squaredNorm() + s.u.squaredNorm();
    return c;
}

/// Ratio of realized quadratic cost to an OPT estimate; nullopt marks the
/// undefined 0-denominator case.
inline std::optional<double> competitive_ratio(const Trajectory& traj, double opt_estimate) {
    double cost = lqr_cost(traj);
    if (opt_estimate <= 0.0) {
        if (cost == 0.0) return 0.0;
        return std::nullopt;
    }
    return cost / opt_estimate;
}

struct CertificateLog {
    double gain_log;         // ln of the certified l2-gain bound
    double loose_gain_log;   // looser closed form, for the table
    double alpha_log;
    double eps;
};

/// Certified worst-case l2-gain, log space only.
/// StandardBasis: 10 M^2 alpha^2 / L, with the looser closed form
/// (4^15 M^10 d^2 / L^3)^{2d}. EpsNetHalf: (4^17 M^10 d / L^3)^{2*5^d}.
inline CertificateLog gain_certificate_log(double M, double L, int d, ExplorationKind kind) {
    DefaultParameters p = default_parameters(M, L, d, kind);
    const double ln4 = std::log(4.0);
    if (kind == ExplorationKind::StandardBasis) {
        double tight = std::log(10.0) + 2.0 * std::log(M) - std::log(L) + 2.0 * p.alpha_log;
        double loose = 2.0 * d *
                       (15.0 * ln4 + 10.0 * std::log(M) + 2.0 * std::log(static_cast<double>(d)) -
                        3.0 * std::log(L));
        return {tight, loose, p.alpha_log, p.eps};
    }
    double g = 2.0 * std::pow(5.0, d) *
               (17.0 * ln4 + 10.0 * std::log(M) + std::log(static_cast<double>(d)) -
                3.0 * std::log(L));
    return {g, g, p.alpha_log, p.eps};
}

/// ln of the Cusumano-Poolla gain certificate (135 kappa^5 M)^{(4 M kappa^3 sqrt(dp))^{dp}}.
inline double cp_certificate_log(double kappa, double M, int d, int p) {
    double base = std::log(135.0) + 5.0 * std::log(kappa) + std::log(M);
    double expo = std::pow(4.0 * M * kappa * kappa * kappa * std::sqrt(double(d) * p),
                           double(d) * p);
    return expo * base;
}

}  // namespace mlds
