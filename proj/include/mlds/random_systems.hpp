#pragma once

#include <cstdint>
#include <random>

#include "mlds/cusumano_poolla.hpp"  // random_orthogonal
#include "mlds/lds.hpp"

namespace mlds {

/// Random plant honoring the published bounds: ||A||_2 <= M (scaled to a
/// random fraction of M), B with singular values drawn strictly above L
/// and at most M.
inline SystemInstance random_system(int d, double M, double L, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = gauss(rng);
    double na = A.jacobiSvd().singularValues()(0);
    double target = M * (0.3 + 0.65 * unif(rng));
    if (na > 0) A *= target / na;

    MatrixXd U = random_orthogonal(d, rng), V = random_orthogonal(d, rng);
    VectorXd sv(d);
    double lo = std::min(1.05 * L, 0.5 * (L + M));
    for (int i = 0; i < d; ++i) sv(i) = lo + (0.95 * M - lo) * unif(rng);
    MatrixXd B = U * sv.asDiagonal() * V.transpose();

    SystemInstance sys;
    sys.A = A;
    sys.B = B;
    sys.M = M;
    sys.L = L;
    sys.d = d;
    return sys;
}

}  // namespace mlds
