#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "mlds/exploration.hpp"
#include "mlds/logspace.hpp"
#include "mlds/rollout.hpp"

namespace mlds {

/// Identification parameter and threshold for the two exploration variants.
/// StandardBasis:  eps = L/(150 M d),       ln alpha = d * ln(4^14 M^8 d^2 / L^2)
/// EpsNetHalf:     eps = L/(1000 M sqrt d), ln alpha = 5^d * ln(4^16 M^8 d / L^2)
/// alpha is astronomically large already at d = 2, so it is only ever
/// handed out in log space.
struct DefaultParameters {
    double eps;
    double alpha_log;
};

inline DefaultParameters default_parameters(double M, double L, int d, ExplorationKind kind) {
    if (M < 1.0 || L <= 0.0 || L > 1.0 || d < 1) {
        throw std::invalid_argument("default_parameters: need M >= 1, 0 < L <= 1, d >= 1");
    }
    const double ln4 = std::log(4.0);
    if (kind == ExplorationKind::StandardBasis) {
        double eps = L / (150.0 * M * d);
        double alpha_log =
            d * (14.0 * ln4 + 8.0 * std::log(M) + 2.0 * std::log(static_cast<double>(d)) -
                 2.0 * std::log(L));
        return {eps, alpha_log};
    }
    if (d > 6) {
        throw std::invalid_argument(
            "default_parameters: eps-net variant refused for d > 6 "
            "(net size 5^d, exploration length 2*5^d)");
    }
    double eps = L / (1000.0 * M * std::sqrt(static_cast<double>(d)));
    double alpha_log = std::pow(5.0, d) * (16.0 * ln4 + 8.0 * std::log(M) +
                                           std::log(static_cast<double>(d)) - 2.0 * std::log(L));
    return {eps, alpha_log};
}

enum class ScalePhase { ControlID, SysID };

/// ln of the exploration magnitudes:
///   control-matrix probes  lambda_i = 4^{2i} M^{2i+1} q / eps^{i+1}
///   system-ID probes       xi_j     = 4^{3j} M^{3j+2} q' / eps^{j+1}
inline double exploration_scale_log(ScalePhase phase, int i, double log_q, double M,
                                    double eps) {
    const double ln4 = std::log(4.0), lnM = std::log(M), lne = std::log(eps);
    if (phase == ScalePhase::ControlID) {
        return 2.0 * i * ln4 + (2.0 * i + 1.0) * lnM + log_q - (i + 1.0) * lne;
    }
    return 3.0 * i * ln4 + (3.0 * i + 2.0) * lnM + log_q - (i + 1.0) * lne;
}

inline double exploration_scale(ScalePhase phase, int i, double q_or_qprime, double M,
                                double eps) {
    return exp_checked(exploration_scale_log(phase, i, std::log(q_or_qprime), M, eps));
}

struct PhiResult {
    MatrixXd A_hat;
    double phi;
    bool converged;
};

/// Minimizes Phi(A~) = max_i ||A~ v_i - y_i||_2 over the spectral ball
/// ||A~||_2 <= M. Phi is a max of convex functions, hence convex; solved
/// by projected subgradient with SVD clipping as the projection.
inline PhiResult minimize_phi(const ExplorationSet& V, const std::vector<VectorXd>& targets,
                              double M, double tol, int max_iters = 20000) {
    const int N = V.size();
    if (static_cast<int>(targets.size()) != N) {
        throw std::invalid_argument("minimize_phi: |targets| != |V|");
    }
    const int d = static_cast<int>(V.vectors[0].size());

    auto project = [&](const MatrixXd& A) {
        Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        VectorXd s = svd.singularValues();
        if (s(0) <= M) return A;
        for (int i = 0; i < s.size(); ++i) s(i) = std::min(s(i), M);
        return MatrixXd(svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose());
    };
    auto phi = [&](const MatrixXd& A, int* argmax) {
        double best = -1.0;
        for (int i = 0; i < N; ++i) {
            double r = (A * V.vectors[i] - targets[i]).norm();
            if (r > best) { best = r; if (argmax) *argmax = i; }
        }
        return best;
    };

    // Warm start from the projected least-squares fit.
    MatrixXd G = MatrixXd::Zero(d, N), Vm = MatrixXd::Zero(d, N);
    for (int i = 0; i < N; ++i) {
        Vm.col(i) = V.vectors[i];
        G.col(i) = targets[i];
    }
    MatrixXd A = project(
        (Vm * Vm.transpose()).ldlt().solve(Vm * G.transpose()).transpose());

    MatrixXd best_A = A;
    double best_phi = phi(A, nullptr);
    double last_improvement_phi = best_phi;
    int since_improvement = 0;
    for (int k = 1; k <= max_iters && best_phi > 0.0; ++k) {
        int imax = 0;
        double val = phi(A, &imax);
        if (val < best_phi) { best_phi = val; best_A = A; }
        VectorXd r = A * V.vectors[imax] - targets[imax];
        double rn = r.norm();
        if (rn == 0.0) break;
        MatrixXd g = (r / rn) * V.vectors[imax].transpose();
        double step = M / std::sqrt(static_cast<double>(k));
        A = project(A - step * g);
        if (++since_improvement >= 500) {
            if (last_improvement_phi - best_phi < tol * 0.01) break;
            last_improvement_phi = best_phi;
            since_improvement = 0;
        }
    }
    return {best_A, best_phi, true};
}

/// K = Bhat^{-1} Ahat via linear solve; requires sigma_min(Bhat) >= L/2,
/// which the identification phase certifies before storing Bhat.
inline MatrixXd synthesize_K(const MatrixXd& A_hat, const MatrixXd& B_hat) {
    return B_hat.partialPivLu().solve(A_hat);
}

enum class Phase { Idle, ControlID, SysIDEven, SysIDOdd, Exploit };

inline std::string phase_name(Phase p, int i) {
    switch (p) {
        case Phase::Idle: return "idle";
        case Phase::ControlID: return "control_id(" + std::to_string(i) + ")";
        case Phase::SysIDEven: return "sysid_even(" + std::to_string(i) + ")";
        case Phase::SysIDOdd: return "sysid_odd(" + std::to_string(i) + ")";
        case Phase::Exploit: return "exploit";
    }
    return "?";
}

struct ControllerEvent {
    int t;
    std::string event;  // "epoch_start" | "restart" | "phase"
    double q_old_log;
    double q_new_log;
    std::string phase;
};

/// Captured probe states and scales from the current identification pass.
/// Raw states and scales are kept so Bhat/Ahat assembly is a pure function.
struct ProbeRecords {
    std::vector<double> lambda;      // control-ID scales actually played
    std::vector<double> xi;          // sys-ID scales actually played
    MatrixXd b_cols;                 // d x d, column i = x_{t+i+1} / lambda_i
    std::vector<VectorXd> a_targets; // target j = x_{t'+2j+2} / xi_j
};

/// The main controller's mutable knowledge across one rollout.
struct EpochState {
    double q_log = kNegInf;        // ln of current budget; -inf means q = 0
    double q_prime_log = kNegInf;  // ln q', q' = 4^{2d} M^{2d} eps^{-d} q
    int epoch_index = 0;
    Phase phase = Phase::Idle;
    int phase_i = 0;  // probe counter within ControlID / SysID
    std::optional<MatrixXd> B_hat;
    std::optional<MatrixXd> A_hat;
    MatrixXd K;
    double eps = 0.0;
    double alpha_log = 0.0;
    ProbeRecords probes;

    double q() const { return std::exp(q_log); }
};

/// Budget-doubling adaptive controller with active exploration.
///
/// Runs in epochs. Whenever ||x_{1:t}||_2 exceeds alpha * q the budget is
/// raised to the current prefix energy and identification restarts:
/// d probe steps along scaled standard basis vectors estimate B column by
/// column, then 2N alternating probe/coast steps estimate A, then the
/// linear feedback K = Bhat^{-1} Ahat is played until the next violation.
/// All threshold comparisons are done in log space; failure checks use
/// strict comparisons exactly as specified, with no tolerance slack.
class AdaptiveController : public Controller {
public:
    struct Options {
        double M = 1.0;
        double L = 1.0;
        int d = 1;
        ExplorationKind variant = ExplorationKind::StandardBasis;
        std::optional<double> eps_override;
        std::optional<double> alpha_override_log;
        /// Seed budget: > 0 starts epoch 1 in ControlID(0) immediately,
        /// for runs where ||f||_2 is known up front.
        double initial_q = 0.0;
        double phi_tol = 1e-9;
    };

    explicit AdaptiveController(const Options& opt)
        : opt_(opt),
          V_(opt.variant == ExplorationKind::StandardBasis ? standard_basis_set(opt.d)
                                                           : eps_net_half_set(opt.d)) {
        DefaultParameters p = default_parameters(opt.M, opt.L, opt.d, opt.variant);
        st_.eps = opt.eps_override.value_or(p.eps);
        st_.alpha_log = opt.alpha_override_log.value_or(p.alpha_log);
        st_.K = MatrixXd::Zero(opt.d, opt.d);
        reset_probes();
        if (opt.initial_q > 0.0) {
            st_.q_log = std::log(opt.initial_q);
            st_.epoch_index = 1;
            st_.phase = Phase::ControlID;
            st_.phase_i = 0;
            events_.push_back({0, "epoch_start", kNegInf, st_.q_log, "control_id(0)"});
        }
    }

    VectorXd act(const Trajectory& traj, int t) override {
        const VectorXd& x = traj.steps[t].x;
        const double px_log = traj.prefix_x_log[t];

        // ||x_{1:t}||_2 > alpha q, evaluated as ln prefix > ln alpha + ln q.
        // With q = 0 any nonzero prefix starts the first epoch.
        bool trigger = (st_.q_log == kNegInf) ? (px_log > kNegInf)
                                              : (px_log > st_.alpha_log + st_.q_log);
        if (trigger) begin_epoch(t, px_log);

        switch (st_.phase) {
            case Phase::Idle:
                return VectorXd::Zero(opt_.d);
            case Phase::ControlID:
                return control_matrix_id_step(traj, t, x, px_log);
            case Phase::SysIDEven:
            case Phase::SysIDOdd:
                return sysid_step(traj, t, x, px_log);
            case Phase::Exploit:
                return -st_.K * x;
        }
        return VectorXd::Zero(opt_.d);
    }

    int epoch() const override { return st_.epoch_index; }
    std::string phase() const override { return phase_name(st_.phase, st_.phase_i); }

    const EpochState& state() const { return st_; }
    const std::vector<ControllerEvent>& events() const { return events_; }
    int restart_count() const { return restarts_; }
    const ExplorationSet& exploration_set() const { return V_; }

private:
    void reset_probes() {
        st_.probes.lambda.clear();
        st_.probes.xi.clear();
        st_.probes.b_cols = MatrixXd::Zero(opt_.d, opt_.d);
        st_.probes.a_targets.clear();
    }

    void begin_epoch(int t, double px_log) {
        double q_old = st_.q_log;
        bool restart = st_.epoch_index > 0;
        st_.q_log = px_log;
        st_.epoch_index += 1;
        st_.phase = Phase::ControlID;
        st_.phase_i = 0;
        reset_probes();
        if (restart) restarts_ += 1;
        events_.push_back({t, restart ? "restart" : "epoch_start", q_old, st_.q_log,
                           phase_name(st_.phase, 0)});
    }

    VectorXd control_matrix_id_step(const Trajectory& traj, int t, const VectorXd& x,
                                    double px_log) {
        const int d = opt_.d;
        int i = st_.phase_i;
        if (i >= 1) st_.probes.b_cols.col(i - 1) = x / st_.probes.lambda[i - 1];
        if (i == d) {
            // Bhat = [x_{t+1}/lambda_0 ... x_{t+d}/lambda_{d-1}]
            MatrixXd B_hat = st_.probes.b_cols;
            double smin = B_hat.jacobiSvd().singularValues().tail(1)(0);
            if (smin < opt_.L / 2.0) {
                begin_epoch(t, px_log);
                return control_matrix_id_step(traj, t, x, px_log);
            }
            st_.B_hat = B_hat;
            b_lu_ = B_hat.partialPivLu();
            st_.q_prime_log = st_.q_log + 2.0 * d * std::log(4.0 * opt_.M) -
                              d * std::log(st_.eps);
            st_.phase = Phase::SysIDEven;
            st_.phase_i = 0;
            events_.push_back({t, "phase", st_.q_log, st_.q_log, phase_name(st_.phase, 0)});
            return sysid_step(traj, t, x, px_log);
        }
        double lam = exp_checked(
            exploration_scale_log(ScalePhase::ControlID, i, st_.q_log, opt_.M, st_.eps));
        st_.probes.lambda.push_back(lam);
        st_.phase_i = i + 1;
        return lam * VectorXd::Unit(d, i);
    }

    VectorXd sysid_step(const Trajectory& traj, int t, const VectorXd& x, double px_log) {
        const int d = opt_.d;
        const int N = V_.size();
        int s = st_.phase_i;
        if (s % 2 == 0 && s >= 2) {
            st_.probes.a_targets.push_back(x / st_.probes.xi[s / 2 - 1]);
        }
        if (s == 2 * N) {
            MatrixXd A_hat;
            if (V_.kind == ExplorationKind::StandardBasis) {
                A_hat.resize(d, d);
                for (int j = 0; j < d; ++j) A_hat.col(j) = st_.probes.a_targets[j];
                double na = A_hat.jacobiSvd().singularValues()(0);
                if (na > 2.0 * opt_.M) {
                    begin_epoch(t, px_log);
                    return control_matrix_id_step(traj, t, x, px_log);
                }
            } else {
                A_hat = minimize_phi(V_, st_.probes.a_targets, opt_.M, opt_.phi_tol).A_hat;
            }
            st_.A_hat = A_hat;
            st_.K = synthesize_K(A_hat, *st_.B_hat);
            st_.phase = Phase::Exploit;
            events_.push_back({t, "phase", st_.q_log, st_.q_log, "exploit"});
            return -st_.K * x;
        }
        if (s % 2 == 0) {
            int j = s / 2;
            double xi = exp_checked(exploration_scale_log(ScalePhase::SysID, j,
                                                          st_.q_prime_log, opt_.M, st_.eps));
            st_.probes.xi.push_back(xi);
            st_.phase_i = s + 1;
            st_.phase = Phase::SysIDOdd;
            return xi * b_lu_.solve(V_.vectors[j]);
        }
        st_.phase_i = s + 1;
        st_.phase = Phase::SysIDEven;
        return VectorXd::Zero(d);
    }

    Options opt_;
    ExplorationSet V_;
    EpochState st_;
    Eigen::PartialPivLU<MatrixXd> b_lu_;
    std::vector<ControllerEvent> events_;
    int restarts_ = 0;
};

}  // namespace mlds
