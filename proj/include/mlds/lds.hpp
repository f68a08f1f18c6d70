#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mlds/logspace.hpp"

namespace mlds {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// The hidden plant: true (A, B) together with the published bounds the
/// controller is allowed to know. B may be rectangular (d x p) only for
/// the Cusumano-Poolla baseline; everything else assumes p == d.
struct SystemInstance {
    MatrixXd A;  // d x d
    MatrixXd B;  // d x p (p == d for the fully actuated setting)
    double M = 1.0;  // spectral bound on A and B, M >= 1
    double L = 1.0;  // lower bound on sigma_min(B), 0 < L <= 1
    int d = 1;

    int control_dim() const { return static_cast<int>(B.cols()); }
};

struct SystemViolation {
    std::string condition;
    double value;
    double bound;
};

/// Checks the three published-bound conditions against the actual matrices.
/// Violations are data, not errors.
inline std::vector<SystemViolation> validate_system(const SystemInstance& sys) {
    std::vector<SystemViolation> out;
    double na = sys.A.jacobiSvd().singularValues()(0);
    Eigen::JacobiSVD<MatrixXd> svdB(sys.B);
    double nb = svdB.singularValues()(0);
    double sb = svdB.singularValues().tail(1)(0);
    if (na > sys.M) out.push_back({"||A||_2 <= M", na, sys.M});
    if (nb > sys.M) out.push_back({"||B||_2 <= M", nb, sys.M});
    if (sb <= sys.L) out.push_back({"sigma_min(B) > L", sb, sys.L});
    return out;
}

/// One time evolution: x_{t+1} = A x_t + B u_t + w_t + f_t.
inline VectorXd step(const SystemInstance& sys, const VectorXd& x, const VectorXd& u,
                     const VectorXd& w, const VectorXd& f) {
    if (x.size() != sys.d || w.size() != sys.d || f.size() != sys.d ||
        u.size() != sys.B.cols()) {
        throw std::invalid_argument("step: dimension mismatch");
    }
    return sys.A * x + sys.B * u + w + f;
}

/// ||v_{1:t}||_2 of a list of vectors; 0 for t = 0.
inline double prefix_energy(const std::vector<VectorXd>& vectors, std::size_t t) {
    if (t > vectors.size()) throw std::invalid_argument("prefix_energy: t exceeds length");
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) s += vectors[i].squaredNorm();
    return std::sqrt(s);
}

struct StepRecord {
    int t;
    VectorXd x;
    VectorXd u;
    VectorXd w;
    VectorXd f;
};

/// Per-step record of a closed-loop run plus running prefix energies.
/// Row t = 0 holds x_0 = u_0 = w_0 = 0 and the initial disturbance f_0.
/// Prefix energies over x run from index 1 (x_0 = 0 by convention), those
/// over f and w from index 0. Running sums of squares are maintained
/// incrementally; square roots are taken at query time.
struct Trajectory {
    int d = 1;
    std::vector<StepRecord> steps;
    std::vector<double> prefix_x;      // ||x_{1:t}||_2, indexed by t
    std::vector<double> prefix_x_log;  // ln of the same, -inf while zero
    std::vector<double> prefix_f;      // ||f_{0:t}||_2
    std::vector<double> prefix_f_log;
    std::vector<double> prefix_w;      // ||w_{0:t}||_2
    std::vector<int> epoch_of_step;
    std::vector<std::string> phase_of_step;

    bool aborted = false;
    std::string abort_reason;
    int abort_step = -1;

    int horizon() const { return static_cast<int>(steps.size()) - 1; }
};

}  // namespace mlds
