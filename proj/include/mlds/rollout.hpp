#pragma once

#include <memory>
#include <string>

#include "mlds/lds.hpp"

namespace mlds {

/// Feedback policy. Observes x_t (already appended to the trajectory) and
/// emits u_t within the same step.
class Controller {
public:
    virtual ~Controller() = default;
    virtual VectorXd act(const Trajectory& traj, int t) = 0;
    virtual int epoch() const { return 0; }
    virtual std::string phase() const { return "static"; }
    /// Unrecoverable internal failure (e.g. candidate set exhausted).
    virtual bool failed() const { return false; }
    virtual std::string failure_reason() const { return {}; }
};

/// Misspecification operator: maps the state history prefix to w_t.
class DeltaSource {
public:
    virtual ~DeltaSource() = default;
    virtual VectorXd w(const Trajectory& traj, int t) = 0;
};

/// Exogenous disturbance source. Sees the trajectory prefix and the control
/// just played (the lower-bound game adversary reacts to u_t).
class FScript {
public:
    virtual ~FScript() = default;
    virtual VectorXd f(int t, const Trajectory& traj, const VectorXd& u_t) = 0;
};

class ZeroController : public Controller {
public:
    explicit ZeroController(int p) : p_(p) {}
    VectorXd act(const Trajectory&, int) override { return VectorXd::Zero(p_); }

private:
    int p_;
};

/// u_t = -K x_t with a fixed gain.
class LinearController : public Controller {
public:
    explicit LinearController(MatrixXd K) : K_(std::move(K)) {}
    VectorXd act(const Trajectory& traj, int t) override { return -K_ * traj.steps[t].x; }
    std::string phase() const override { return "linear"; }

private:
    MatrixXd K_;
};

class ZeroDelta : public DeltaSource {
public:
    explicit ZeroDelta(int d) : d_(d) {}
    VectorXd w(const Trajectory&, int) override { return VectorXd::Zero(d_); }

private:
    int d_;
};

class ZeroF : public FScript {
public:
    explicit ZeroF(int d) : d_(d) {}
    VectorXd f(int, const Trajectory&, const VectorXd&) override { return VectorXd::Zero(d_); }

private:
    int d_;
};

/// Fixed f sequence; zero beyond the scripted range.
class ScriptedF : public FScript {
public:
    ScriptedF(int d, std::vector<VectorXd> values) : d_(d), values_(std::move(values)) {}
    VectorXd f(int t, const Trajectory&, const VectorXd&) override {
        if (t >= 0 && t < static_cast<int>(values_.size())) return values_[t];
        return VectorXd::Zero(d_);
    }

private:
    int d_;
    std::vector<VectorXd> values_;
};

/// Closed-loop driver. For t = 1..T: record x_t, query the controller for
/// u_t, the misspecification for w_t, the disturbance for f_t, then advance.
/// The loop is strictly sequential; distinct rollouts share nothing.
inline Trajectory rollout(const SystemInstance& sys, Controller& controller,
                          DeltaSource& delta, FScript& f_script, int T) {
    if (T < 1) throw std::invalid_argument("rollout: T must be >= 1");
    Trajectory traj;
    traj.d = sys.d;
    traj.steps.reserve(T + 1);
    traj.prefix_x.assign(1, 0.0);
    traj.prefix_x_log.assign(1, kNegInf);

    EnergyAccumulator ex, ef, ew;

    // Row 0: x_0 = u_0 = w_0 = 0 and the initial disturbance f_0 (x_1 = f_0).
    VectorXd z = VectorXd::Zero(sys.d);
    VectorXd zu = VectorXd::Zero(sys.control_dim());
    traj.steps.push_back({0, z, zu, z, z});
    VectorXd f0 = f_script.f(0, traj, zu);
    traj.steps[0].f = f0;
    ef.add(f0);
    traj.prefix_f.push_back(ef.norm());
    traj.prefix_f_log.push_back(ef.log_norm());
    traj.prefix_w.push_back(0.0);
    traj.epoch_of_step.push_back(0);
    traj.phase_of_step.push_back("init");

    VectorXd x = step(sys, z, zu, z, f0);
    for (int t = 1; t <= T; ++t) {
        if (!x.allFinite()) {
            traj.aborted = true;
            traj.abort_reason = "non-finite state";
            traj.abort_step = t;
            break;
        }
        ex.add(x);
        traj.steps.push_back({t, x, zu, z, z});
        traj.prefix_x.push_back(ex.norm());
        traj.prefix_x_log.push_back(ex.log_norm());

        VectorXd u;
        try {
            u = controller.act(traj, t);
        } catch (const CertifiedOverflow&) {
            traj.aborted = true;
            traj.abort_reason = "control magnitude overflows double range";
            traj.abort_step = t;
            traj.prefix_f.push_back(ef.norm());
            traj.prefix_f_log.push_back(ef.log_norm());
            traj.prefix_w.push_back(ew.norm());
            traj.epoch_of_step.push_back(controller.epoch());
            traj.phase_of_step.push_back(controller.phase());
            break;
        }
        traj.epoch_of_step.push_back(controller.epoch());
        traj.phase_of_step.push_back(controller.phase());
        if (controller.failed()) {
            traj.aborted = true;
            traj.abort_reason = controller.failure_reason();
            traj.abort_step = t;
            traj.prefix_f.push_back(ef.norm());
            traj.prefix_f_log.push_back(ef.log_norm());
            traj.prefix_w.push_back(ew.norm());
            break;
        }
        VectorXd w = delta.w(traj, t);
        VectorXd f = f_script.f(t, traj, u);
        traj.steps[t].u = u;
        traj.steps[t].w = w;
        traj.steps[t].f = f;
        ew.add(w);
        ef.add(f);
        traj.prefix_f.push_back(ef.norm());
        traj.prefix_f_log.push_back(ef.log_norm());
        traj.prefix_w.push_back(ew.norm());

        x = step(sys, x, u, w, f);
    }
    return traj;
}

}  // namespace mlds
