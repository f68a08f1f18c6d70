#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace mlds {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

/// log(exp(a) - exp(b)) for a >= b; returns -inf when the difference
/// underflows (or a <= b up to round-off).
inline double log_sub_exp(double a, double b) {
    if (b == kNegInf) return a;
    if (b >= a) return kNegInf;
    return a + std::log1p(-std::exp(b - a));
}

/// log(||v||_2^2), stable for vectors whose squared norm overflows.
inline double log_sq_norm(const Eigen::VectorXd& v) {
    double m = v.cwiseAbs().maxCoeff();
    if (m == 0.0) return kNegInf;
    double s = (v / m).squaredNorm();
    return 2.0 * std::log(m) + std::log(s);
}

/// Running sum of squares, carried both raw (may saturate to inf) and in
/// log space. Certified thresholds reach 1e200-scale magnitudes at larger
/// dimension, so all controller comparisons go through the log channel.
class EnergyAccumulator {
public:
    void add(const Eigen::VectorXd& v) {
        sum_sq_ += v.squaredNorm();
        log_sum_sq_ = log_add_exp(log_sum_sq_, log_sq_norm(v));
    }

    void add_scalar(double v) {
        sum_sq_ += v * v;
        if (v != 0.0) log_sum_sq_ = log_add_exp(log_sum_sq_, 2.0 * std::log(std::abs(v)));
    }

    double sum_sq() const { return sum_sq_; }
    double log_sum_sq() const { return log_sum_sq_; }
    /// ||.||_2 of everything accumulated so far.
    double norm() const { return std::sqrt(sum_sq_); }
    /// log ||.||_2; -inf when empty.
    double log_norm() const { return 0.5 * log_sum_sq_; }

private:
    double sum_sq_ = 0.0;
    double log_sum_sq_ = kNegInf;
};

/// Raised when a log-space certified quantity cannot be represented as a
/// finite double. Carries the natural log of the offending value.
class CertifiedOverflow : public std::runtime_error {
public:
    explicit CertifiedOverflow(double log_value)
        : std::runtime_error("value overflows double range, ln = " + std::to_string(log_value)),
          log_value_(log_value) {}
    double log_value() const { return log_value_; }

private:
    double log_value_;
};

/// exp(x) with an overflow check; throws CertifiedOverflow instead of
/// silently returning inf.
inline double exp_checked(double log_value) {
    double v = std::exp(log_value);
    if (!std::isfinite(v)) throw CertifiedOverflow(log_value);
    return v;
}

}  // namespace mlds
