#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "mlds/lds.hpp"
#include "mlds/rollout.hpp"

namespace mlds {

inline MatrixXd clip_spectral(const MatrixXd& K, double radius) {
    Eigen::JacobiSVD<MatrixXd> svd(K, Eigen::ComputeThinU | Eigen::ComputeThinV);
    VectorXd s = svd.singularValues();
    if (s(0) <= radius) return K;
    for (int i = 0; i < s.size(); ++i) s(i) = std::min(s(i), radius);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Axis-aligned grid net over the spectral ball {||K||_2 <= kappa} of
/// p x d matrices. Per-coordinate spacing eps/sqrt(pd) with
/// ceil(2 kappa sqrt(pd)/eps)+1 points per axis; grid points outside the
/// ball are replaced by their spectral-ball projections so the covering
/// radius is preserved (the Frobenius projection is nonexpansive).
/// Size bound: (2 kappa sqrt(dp)/eps + 1)^{dp}.
class ControllerGridNet {
public:
    ControllerGridNet(double eps, double kappa, int d, int p, std::size_t size_cap)
        : kappa_(kappa), d_(d), p_(p) {
        if (eps <= 0.0 || kappa <= 0.0) {
            throw std::invalid_argument("controller grid net: need eps > 0, kappa > 0");
        }
        spacing_ = eps / std::sqrt(static_cast<double>(p * d));
        per_axis_ = static_cast<std::int64_t>(std::ceil(2.0 * kappa / spacing_)) + 1;
        log_size_ = p * d * std::log(static_cast<double>(per_axis_));
        double total = std::pow(static_cast<double>(per_axis_), p * d);
        if (total > static_cast<double>(size_cap)) {
            materializable_ = false;
            size_ = 0;
        } else {
            materializable_ = true;
            size_ = static_cast<std::size_t>(total);
        }
    }

    bool materializable() const { return materializable_; }
    std::size_t size() const { return size_; }
    double log_size() const { return log_size_; }
    std::int64_t per_axis() const { return per_axis_; }

    /// Grid member by flat index (lazy; duplicates after clipping allowed).
    MatrixXd at(std::size_t flat) const {
        MatrixXd K(p_, d_);
        for (int r = 0; r < p_; ++r) {
            for (int c = 0; c < d_; ++c) {
                std::int64_t coord = static_cast<std::int64_t>(flat % per_axis_);
                flat /= per_axis_;
                K(r, c) = -kappa_ + coord * spacing_;
            }
        }
        return clip_spectral(K, kappa_);
    }

private:
    double kappa_, spacing_, log_size_;
    int d_, p_;
    std::int64_t per_axis_;
    bool materializable_;
    std::size_t size_;
};

/// Materialized grid net; refused when the size exceeds the cap.
inline std::vector<MatrixXd> controller_grid_net(double eps, double kappa, int d, int p,
                                                 std::size_t size_cap = 1'000'000) {
    ControllerGridNet net(eps, kappa, d, p, size_cap);
    if (!net.materializable()) {
        throw std::length_error("controller_grid_net: ln size " +
                                std::to_string(net.log_size()) + " exceeds cap");
    }
    std::vector<MatrixXd> out;
    out.reserve(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) out.push_back(net.at(i));
    return out;
}

struct CPEvent {
    int t;
    double q_old;
    double q_new;
    std::size_t candidate_index;
};

/// Enumeration controller: plays a fixed candidate until the state energy
/// exceeds alpha * q (alpha = 27 kappa^4), then discards it and moves on.
/// Candidate order is a fixed pseudorandom permutation of the grid indices
/// (reproducible; see notes on why plain lexicographic order is unusable).
class CusumanoPoollaController : public Controller {
public:
    CusumanoPoollaController(double M, double kappa, double F, int d, int p,
                             std::uint64_t order_seed = 0x9e3779b97f4a7c15ull)
        : net_(1.0 / (2.0 * M * kappa * kappa), kappa, d, p,
               std::numeric_limits<std::size_t>::max()),
          alpha_(27.0 * kappa * kappa * kappa * kappa),
          kappa_(kappa),
          q_(F),
          order_seed_(order_seed) {
        if (F <= 0.0) throw std::invalid_argument("cusumano-poolla: need F > 0");
        net_size_ = static_cast<std::size_t>(
            std::min(std::pow(static_cast<double>(net_.per_axis()), p * d),
                     2.0e18));
        current_index_ = permuted(0);
        current_K_ = net_.at(current_index_);
    }

    VectorXd act(const Trajectory& traj, int t) override {
        double prefix = traj.prefix_x[t];
        if (prefix > alpha_ * q_) {
            double q_old = q_;
            q_ = prefix;
            ++consumed_;
            if (consumed_ >= net_size_) {
                failed_ = true;
                return VectorXd::Zero(current_K_.rows());
            }
            current_index_ = permuted(consumed_);
            current_K_ = net_.at(current_index_);
            events_.push_back({t, q_old, q_, current_index_});
        }
        return -current_K_ * traj.steps[t].x;
    }

    std::string phase() const override { return "cusumano_poolla"; }
    bool failed() const override { return failed_; }
    std::string failure_reason() const override { return "candidate controllers exhausted"; }

    int switches() const { return static_cast<int>(events_.size()); }
    double q() const { return q_; }
    double alpha() const { return alpha_; }
    const MatrixXd& current_K() const { return current_K_; }
    const std::vector<CPEvent>& events() const { return events_; }
    const ControllerGridNet& net() const { return net_; }
    double net_log_size() const { return net_.log_size(); }

private:
    // Fixed permutation of [0, net_size): k -> (a k + b) mod n with a a
    // prime exceeding n, so the map is a bijection. Consecutive grid
    // indices differ by one coordinate tick and behave nearly identically
    // in closed loop; a spread-out order reaches a stabilizing candidate
    // in a realistic number of switches.
    std::size_t permuted(std::size_t k) const {
        const unsigned __int128 a = 2305843009213693951ull;  // 2^61 - 1, prime
        unsigned __int128 v = a * static_cast<unsigned __int128>(k) + order_seed_;
        return static_cast<std::size_t>(v % net_size_);
    }

    ControllerGridNet net_;
    double alpha_, kappa_, q_;
    std::uint64_t order_seed_;
    std::size_t net_size_;
    std::size_t current_index_;
    std::size_t consumed_ = 0;
    MatrixXd current_K_;
    std::vector<CPEvent> events_;
    bool failed_ = false;
};

/// Certificate (K*, H, Lambda) of kappa-strong stabilizability.
struct StabilizabilityCertificate {
    MatrixXd K_star;
    MatrixXd H;
    MatrixXd Lambda;
    double kappa;
};

inline MatrixXd random_orthogonal(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd G(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) G(i, j) = gauss(rng);
    Eigen::HouseholderQR<MatrixXd> qr(G);
    MatrixXd Q = qr.householderQ();
    MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i)
        if (R(i, i) < 0) Q.col(i) = -Q.col(i);
    return Q;
}

/// Builds a kappa-strongly stabilizable instance with a verifiable
/// certificate: A = H Lambda H^{-1} - B K*, so A + B K* = H Lambda H^{-1}.
/// b_scale tunes ||B||_2; kept well below 1 so a healthy fraction of net
/// candidates stabilize the plant under u = -Kx.
inline std::pair<SystemInstance, StabilizabilityCertificate> make_strongly_stabilizable_instance(
    double kappa, int d, int p, std::uint64_t seed, double b_scale = 0.25) {
    if (kappa < 1.0) throw std::invalid_argument("need kappa >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // H = Q1 D Q2 with singular values in [1, sqrt(kappa)]:
    // ||H||, ||H^{-1}||, cond(H) all <= kappa.
    MatrixXd Q1 = random_orthogonal(d, rng), Q2 = random_orthogonal(d, rng);
    VectorXd sv(d);
    double smax = std::sqrt(kappa);
    for (int i = 0; i < d; ++i) sv(i) = 1.0 + (smax - 1.0) * unif(rng);
    MatrixXd H = Q1 * sv.asDiagonal() * Q2;

    double lam_cap = 1.0 - 1.0 / kappa;
    MatrixXd Lambda = MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) Lambda(i, i) = lam_cap * (2.0 * unif(rng) - 1.0);

    MatrixXd K_star(p, d);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < d; ++c) K_star(r, c) = gauss(rng);
    double nk = K_star.jacobiSvd().singularValues()(0);
    if (nk > 0) K_star *= std::min(1.0, kappa / nk) * (kappa == 1.0 ? 1.0 : 0.9);

    MatrixXd B(d, p);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < p; ++c) B(r, c) = gauss(rng);
    double nb = B.jacobiSvd().singularValues()(0);
    if (nb > 0) B *= b_scale / nb;

    MatrixXd Hinv = H.partialPivLu().inverse();
    MatrixXd A = H * Lambda * Hinv - B * K_star;

    SystemInstance sys;
    sys.A = A;
    sys.B = B;
    sys.d = d;
    sys.L = 0.0;  // not fully actuated; L unused by this baseline
    double na = A.jacobiSvd().singularValues()(0);
    sys.M = std::max({1.0, na, B.jacobiSvd().singularValues()(0)});
    return {sys, {K_star, H, Lambda, kappa}};
}

struct StabilizabilityViolation {
    std::string condition;
    double value;
    double bound;
};

/// Checks a strong-stabilizability certificate against Def. of the closed
/// loop A + B K = H Lambda H^{-1}; singular H is a violation, not an error.
inline std::vector<StabilizabilityViolation> verify_strong_stabilizability(
    const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& H,
    const MatrixXd& Lam, double kappa) {
    std::vector<StabilizabilityViolation> out;
    double nk = K.jacobiSvd().singularValues()(0);
    const double tol = 1.0 + 1e-12;
    if (nk > kappa * tol) out.push_back({"||K||_2 <= kappa", nk, kappa});

    Eigen::FullPivLU<MatrixXd> lu(H);
    if (!lu.isInvertible()) {
        out.push_back({"H invertible", 0.0, 0.0});
        return out;
    }
    MatrixXd Hinv = lu.inverse();
    double nh = H.jacobiSvd().singularValues()(0);
    double nhi = Hinv.jacobiSvd().singularValues()(0);
    if (nh > kappa * tol) out.push_back({"||H||_2 <= kappa", nh, kappa});
    if (nhi > kappa * tol) out.push_back({"||H^{-1}||_2 <= kappa", nhi, kappa});
    if (nh * nhi > kappa * tol) out.push_back({"cond(H) <= kappa", nh * nhi, kappa});

    double nlam = Lam.jacobiSvd().singularValues()(0);
    double lam_cap = 1.0 - 1.0 / kappa;
    if (nlam > lam_cap + 1e-12) out.push_back({"||Lambda||_2 <= 1 - 1/kappa", nlam, lam_cap});

    MatrixXd closed = A + B * K;
    MatrixXd target = H * Lam * Hinv;
    double scale = std::max(1.0, target.norm());
    double rel = (closed - target).norm() / scale;
    if (rel > 1e-9) out.push_back({"A + BK = H Lambda H^{-1}", rel, 1e-9});
    return out;
}

}  // namespace mlds
