#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "mlds/logspace.hpp"
#include "mlds/rollout.hpp"

namespace mlds {

enum class DeltaPolicy { Zero, GreedyAligned, GreedyAntiK, MatrixShift };

/// Misspecification source at budget h: after every step
/// sum ||w_s||^2 <= h^2 sum ||x_s||^2. Greedy policies saturate the
/// budget each step; spent energy is tracked in log space so the
/// invariant survives 1e150-scale trajectories.
class DeltaBudget : public DeltaSource {
public:
    DeltaBudget(double h, int d, DeltaPolicy policy)
        : h_(h), d_(d), policy_(policy) {
        if (h < 0.0) throw std::invalid_argument("DeltaBudget: h >= 0 required");
    }

    /// For MatrixShift: w_t = E x_t, clipped to the remaining budget.
    void set_shift(const MatrixXd& E) { E_ = E; }
    /// Direction hint for GreedyAntiK: the harness passes the controller's
    /// current plant map; the adversary never reads the hidden plant.
    void set_direction_hint(const VectorXd& dir) { hint_ = dir; }

    VectorXd w(const Trajectory& traj, int t) override {
        if (h_ == 0.0 || policy_ == DeltaPolicy::Zero) return VectorXd::Zero(d_);

        // Remaining budget r^2 = h^2 ||x_{1:t}||^2 - spent, in log space.
        double cap_log = 2.0 * std::log(h_) + 2.0 * traj.prefix_x_log[t];
        double r_sq_log = log_sub_exp(cap_log, spent_sq_log_);
        if (r_sq_log == kNegInf) return VectorXd::Zero(d_);
        double r = std::exp(0.5 * r_sq_log);

        VectorXd dir = direction(traj.steps[t].x);
        if (dir.size() == 0) return VectorXd::Zero(d_);

        VectorXd w_t;
        if (policy_ == DeltaPolicy::MatrixShift) {
            w_t = E_ * traj.steps[t].x;
            double n = w_t.norm();
            if (n > r) w_t *= r / n;
        } else {
            w_t = r * dir;
        }
        spent_sq_log_ = log_add_exp(spent_sq_log_, log_sq_norm(w_t));
        return w_t;
    }

    double spent_sq_log() const { return spent_sq_log_; }

private:
    VectorXd direction(const VectorXd& x) const {
        switch (policy_) {
            case DeltaPolicy::GreedyAligned: {
                double n = x.norm();
                if (n == 0.0 || !std::isfinite(n)) return {};
                return x / n;
            }
            case DeltaPolicy::GreedyAntiK: {
                if (hint_.size() != d_) return {};
                double n = hint_.norm();
                if (n == 0.0) return {};
                return hint_ / n;
            }
            case DeltaPolicy::MatrixShift:
                return VectorXd::Zero(d_);  // unused, direction comes from E x
            default:
                return {};
        }
    }

    double h_;
    int d_;
    DeltaPolicy policy_;
    MatrixXd E_;
    VectorXd hint_;
    double spent_sq_log_ = kNegInf;
};

/// The robustness-ceiling example: paired with
/// A_eps = [[2, eps], [0, 2]], B = (0, 1)^T, the map w_t = [[0,-eps],[0,0]] x_t
/// converts the plant into the uncontrollable A_0.
inline VectorXd unstabilizable_delta(const VectorXd& x, double eps) {
    if (x.size() != 2) throw std::invalid_argument("unstabilizable_delta: d == 2 required");
    VectorXd w(2);
    w << -eps * x(1), 0.0;
    return w;
}

/// State of the normalized 1-D lower-bound game: z (normalized state),
/// beta (running least-squares estimate), theta (residual dispersion).
struct NormalizedGameState {
    double z = 0.0;
    double beta = 0.0;
    double theta = 0.0;
    bool t0_reached = false;
};

/// sign with sign(0) = 1, exactly as the game defines it.
inline double game_sign(double v) { return v >= 0.0 ? 1.0 : -1.0; }

/// Adversary move: keeps |z| >= 2 gamma0, herds beta into
/// I0 = [a0 + (4+mu) g0, a0 + (8+3mu) g0], and goes quiet once both hold.
inline double lb_adversary_step(const NormalizedGameState& y, double delta, double a0,
                                double gamma0, double mu) {
    if (gamma0 < 1.0 || mu <= 0.0) {
        throw std::invalid_argument("lb_adversary_step: need gamma0 >= 1, mu > 0");
    }
    double lo = a0 + (4.0 + mu) * gamma0;
    double hi = a0 + (8.0 + 3.0 * mu) * gamma0;
    double c0 = a0 + (6.0 + 2.0 * mu) * gamma0;
    bool in_I0 = (y.beta >= lo && y.beta <= hi);
    if (std::abs(delta) >= 2.0 * gamma0 && in_I0) return 0.0;
    if (std::abs(delta) >= (2.0 + mu) * gamma0 && !in_I0) {
        return -mu * gamma0 * game_sign(y.z * (y.beta - c0));
    }
    return -(4.0 + mu) * gamma0 * game_sign(y.z * (y.beta - c0));
}

/// One step of the normalized recursion:
/// z' = nu + delta, beta' = beta + z nu / sqrt(1+z^2), theta' = (theta + nu^2)/(1+z^2).
inline NormalizedGameState normalized_update(const NormalizedGameState& y, double delta,
                                             double nu) {
    NormalizedGameState out = y;
    out.z = nu + delta;
    out.beta = y.beta + y.z * nu / std::sqrt(1.0 + y.z * y.z);
    out.theta = (y.theta + nu * nu) / (1.0 + y.z * y.z);
    return out;
}

/// Inverts the game normalization (h = 0): the raw disturbance whose
/// normalized effect is nu, given the running sums' beta and p_t.
inline double raw_f_from_nu(double nu, double beta, double a, double x_t, double p_t) {
    return nu * std::sqrt(p_t + x_t * x_t) + (beta - a) * x_t;
}

/// Raw-sum bookkeeping for the 1-D game: p = sum x_s^2, q = sum x_s xi_s,
/// r = sum xi_s^2 with xi_s = x_{s+1} - u_s, all over s < t.
struct GameSums {
    double p = 0.0;
    double q = 0.0;
    double r = 0.0;

    void fold(double x_s, double xi_s) {
        p += x_s * x_s;
        q += x_s * xi_s;
        r += xi_s * xi_s;
    }

    double beta() const { return q / p; }
    double theta() const { return (r * p - q * q) / (p * p); }
};

/// Disturbance source running the lower-bound adversary against whatever
/// controller drives the rollout (1-D, h = 0). Before the game starts
/// (p_t = 0) it emits a unit kick.
class LbGameF : public FScript {
public:
    /// p_cap retires the game before the raw sums overflow doubles: the
    /// state energy grows by a factor >= 1 + 4 gamma0^2 per active step,
    /// so long horizons need the source to eventually go quiet.
    LbGameF(double a, double gamma0, double mu, double p_cap = 1e250)
        : a_(a), gamma0_(gamma0), mu_(mu), p_cap_(p_cap) {
        if (mu <= 0.0 || mu >= 1.0 / (3.0 * gamma0 * gamma0)) {
            throw std::invalid_argument("LbGameF: need 0 < mu < 1/(3 gamma0^2)");
        }
    }

    VectorXd f(int t, const Trajectory& traj, const VectorXd& u_t) override {
        VectorXd out(1);
        if (t == 0) {
            out(0) = 1.0;
            return out;
        }
        if (retired_) {
            out(0) = 0.0;
            return out;
        }
        // Fold the step that completed at t-1: xi_{t-1} = x_t - u_{t-1}.
        double x_prev = traj.steps[t - 1].x(0);
        double u_prev = traj.steps[t - 1].u(0);
        double x_t = traj.steps[t].x(0);
        sums_.fold(x_prev, x_t - u_prev);
        if (sums_.p > p_cap_) {
            retired_ = true;
            last_state_.reset();
            out(0) = 0.0;
            return out;
        }

        if (sums_.p <= 0.0) {
            out(0) = 1.0;  // keep kicking until the game can start
            return out;
        }
        NormalizedGameState y;
        y.z = x_t / std::sqrt(sums_.p);
        y.beta = sums_.beta();
        y.theta = sums_.theta();
        y.t0_reached = true;
        double delta = (u_t(0) + y.beta * x_t) / std::sqrt(sums_.p + x_t * x_t);
        double nu = lb_adversary_step(y, delta, a_, gamma0_, mu_);
        last_nu_ = nu;
        last_state_ = y;
        out(0) = raw_f_from_nu(nu, y.beta, a_, x_t, sums_.p);
        return out;
    }

    const GameSums& sums() const { return sums_; }
    std::optional<NormalizedGameState> last_state() const { return last_state_; }
    double last_nu() const { return last_nu_; }
    bool retired() const { return retired_; }

private:
    double a_, gamma0_, mu_, p_cap_;
    bool retired_ = false;
    GameSums sums_;
    std::optional<NormalizedGameState> last_state_;
    double last_nu_ = 0.0;
};

/// Default game aggressiveness: strictly inside 0 < mu < gamma0^{-2}/3.
inline double default_mu(double gamma0) {
    return std::min(0.1, 1.0 / (3.0 * gamma0 * gamma0)) / 2.0;
}

}  // namespace mlds
