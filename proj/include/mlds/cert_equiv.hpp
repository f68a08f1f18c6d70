#pragma once

#include <algorithm>
#include <cmath>

#include "mlds/rollout.hpp"

namespace mlds {

/// Incremental 1-D least squares: X = sum x_s^2, Q = sum x_s (x_{s+1} - u_s).
/// The clipped estimate a_hat = clip_{[-M,M]}(Q/X) is exact certainty
/// equivalence; no re-solve per step.
struct CertEquivState {
    double X = 0.0;
    double Q = 0.0;
    double a_hat = 0.0;
    double M = 1.0;
};

/// One step of the certainty-equivalence controller: fold (x_prev, u_prev,
/// x_t) into the running sums, clip the estimate, play u_t = -a_hat x_t.
inline double cert_equiv_step(CertEquivState& state, double x_t, double x_prev,
                              double u_prev) {
    state.X += x_prev * x_prev;
    state.Q += x_prev * (x_t - u_prev);
    double a_bar = (state.X > 0.0) ? state.Q / state.X : 0.0;
    state.a_hat = std::clamp(a_bar, -state.M, state.M);
    return -state.a_hat * x_t;
}

class CertEquivController : public Controller {
public:
    explicit CertEquivController(double M) { st_.M = M; }

    VectorXd act(const Trajectory& traj, int t) override {
        double x_t = traj.steps[t].x(0);
        double x_prev = traj.steps[t - 1].x(0);
        double u_prev = traj.steps[t - 1].u(0);
        VectorXd u(1);
        u(0) = cert_equiv_step(st_, x_t, x_prev, u_prev);
        return u;
    }

    std::string phase() const override { return "cert_equiv"; }
    const CertEquivState& state() const { return st_; }

private:
    CertEquivState st_;
};

}  // namespace mlds
