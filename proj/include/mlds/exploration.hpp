#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mlds {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ExplorationKind { StandardBasis, EpsNetHalf };

/// Ordered set of unit exploration directions V = (v_0 .. v_{N-1}).
struct ExplorationSet {
    ExplorationKind kind;
    std::vector<VectorXd> vectors;

    int size() const { return static_cast<int>(vectors.size()); }
};

/// Finite set of unit vectors covering the unit sphere to radius eps.
/// Construction: cube grid of spacing eps/sqrt(d), normalized to the
/// sphere, deduplicated. A grid point within eps/(2 sqrt(d)) per
/// coordinate of a unit x is within eps/2 in l2, and projecting it to the
/// sphere at most doubles the distance.
inline std::vector<VectorXd> sphere_net(double eps, int d, std::size_t size_cap = 2'000'000) {
    if (eps <= 0.0 || d < 1) throw std::invalid_argument("sphere_net: need eps > 0, d >= 1");
    if (eps >= 2.0) {
        // Sphere diameter is 2; one point covers everything.
        VectorXd v = VectorXd::Zero(d);
        v(0) = 1.0;
        return {v};
    }
    double spacing = eps / std::sqrt(static_cast<double>(d));
    int half = static_cast<int>(std::ceil(1.0 / spacing));
    std::size_t per_axis = 2 * static_cast<std::size_t>(half) + 1;
    double total = std::pow(static_cast<double>(per_axis), d);
    if (total > static_cast<double>(size_cap)) {
        throw std::length_error("sphere_net: grid size " + std::to_string(total) +
                                " exceeds cap");
    }

    // Only the grid shell around the sphere matters for covering: the
    // nearest grid point to a unit vector has norm within spacing*sqrt(d)
    // of 1. Deduplicate directions via quantized keys.
    double shell = spacing * std::sqrt(static_cast<double>(d));
    std::vector<VectorXd> out;
    std::set<std::vector<std::int64_t>> seen;
    std::vector<int> idx(d, -half);
    while (true) {
        VectorXd g(d);
        for (int i = 0; i < d; ++i) g(i) = idx[i] * spacing;
        double n = g.norm();
        if (n > 1e-9 && std::abs(n - 1.0) <= shell) {
            VectorXd v = g / n;
            std::vector<std::int64_t> key(d);
            for (int i = 0; i < d; ++i) key[i] = std::llround(v(i) * 1e9);
            if (seen.insert(key).second) out.push_back(v);
        }
        int k = 0;
        while (k < d && ++idx[k] > half) idx[k++] = -half;
        if (k == d) break;
    }
    return out;
}

inline ExplorationSet standard_basis_set(int d) {
    ExplorationSet s{ExplorationKind::StandardBasis, {}};
    for (int i = 0; i < d; ++i) s.vectors.push_back(VectorXd::Unit(d, i));
    return s;
}

/// 1/2-net of the unit sphere. Refused for d > 6: the net has up to 5^d
/// members and the identification pass takes 2N + d steps.
inline ExplorationSet eps_net_half_set(int d) {
    if (d > 6) throw std::invalid_argument("eps_net_half_set: d > 6 refused (net size 5^d)");
    ExplorationSet s{ExplorationKind::EpsNetHalf, sphere_net(0.5, d)};
    return s;
}

}  // namespace mlds
