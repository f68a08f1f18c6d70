#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "mlds/cusumano_poolla.hpp"
#include "mlds/rollout.hpp"

using namespace mlds;
using Catch::Matchers::WithinAbs;

TEST_CASE("controller_grid_net: kappa=1, d=p=1, eps=1 is {-1, 0, 1}") {
    auto net = controller_grid_net(1.0, 1.0, 1, 1);
    std::set<double> vals;
    for (const auto& K : net) vals.insert(K(0, 0));
    CHECK(vals == std::set<double>{-1.0, 0.0, 1.0});
}

TEST_CASE("controller_grid_net: size respects the closed-form bound") {
    for (double eps : {0.5, 1.0}) {
        for (int d : {1, 2}) {
            int p = d;
            auto net = controller_grid_net(eps, 1.5, d, p);
            double bound = std::pow(2.0 * 1.5 * std::sqrt(double(d) * p) / eps + 1.0,
                                    double(d) * p);
            CHECK(static_cast<double>(net.size()) <= bound + 1e-9);
        }
    }
}

TEST_CASE("controller_grid_net: Monte-Carlo covering of the spectral ball") {
    double eps = 0.7, kappa = 1.2;
    int d = 2, p = 2;
    auto net = controller_grid_net(eps, kappa, d, p);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        MatrixXd K(p, d);
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < d; ++c) K(r, c) = g(rng);
        K = clip_spectral(K, kappa * 0.999);
        double best = 1e300;
        for (const auto& C : net) {
            Eigen::JacobiSVD<MatrixXd> svd(K - C);
            best = std::min(best, svd.singularValues()(0));
        }
        CHECK(best <= eps);
    }
}

TEST_CASE("controller_grid_net: cap refusal") {
    CHECK_THROWS_AS(controller_grid_net(1e-4, 2.0, 3, 3, 1000), std::length_error);
}

TEST_CASE("lazy grid enumerates the same members as the materialized one") {
    ControllerGridNet lazy(1.0, 1.0, 1, 2, 1 << 20);
    auto dense = controller_grid_net(1.0, 1.0, 1, 2);
    REQUIRE(lazy.size() == dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i) {
        CHECK((lazy.at(i) - dense[i]).norm() < 1e-14);
    }
}

TEST_CASE("cusumano-poolla: within budget the control is -Kx, no event") {
    CusumanoPoollaController c(1.0, 1.0, 100.0, 1, 1);
    Trajectory traj;
    traj.d = 1;
    VectorXd z = VectorXd::Zero(1);
    traj.steps.push_back({0, z, z, z, z});
    traj.prefix_x = {0.0};
    traj.steps.push_back({1, VectorXd::Constant(1, 2.0), z, z, z});
    traj.prefix_x.push_back(2.0);
    MatrixXd K0 = c.current_K();
    VectorXd u = c.act(traj, 1);
    CHECK_THAT(u(0), WithinAbs(-K0(0, 0) * 2.0, 1e-14));
    CHECK(c.switches() == 0);

    // x = 0 in exploit -> u = 0
    traj.steps.push_back({2, z, z, z, z});
    traj.prefix_x.push_back(2.0);
    CHECK(c.act(traj, 2).isZero());
}

TEST_CASE("cusumano-poolla: threshold violation switches candidate and raises q") {
    double kappa = 1.0, F = 1.0;
    CusumanoPoollaController c(1.0, kappa, F, 1, 1);
    double alpha = c.alpha();
    CHECK_THAT(alpha, WithinAbs(27.0, 1e-14));
    Trajectory traj;
    traj.d = 1;
    VectorXd z = VectorXd::Zero(1);
    traj.steps.push_back({0, z, z, z, z});
    traj.prefix_x = {0.0};
    double big = alpha * F * 2.0;  // prefix beyond alpha q
    traj.steps.push_back({1, VectorXd::Constant(1, big), z, z, z});
    traj.prefix_x.push_back(big);
    MatrixXd K0 = c.current_K();
    c.act(traj, 1);
    CHECK(c.switches() == 1);
    CHECK_THAT(c.q(), WithinAbs(big, 1e-12));
    CHECK((c.current_K() - K0).norm() > 0.0);  // candidate discarded
}

TEST_CASE("cusumano-poolla: exhausting the net reports failure") {
    CusumanoPoollaController c(1.0, 1.0, 1.0, 1, 1);  // net {-1, 0, 1}
    Trajectory traj;
    traj.d = 1;
    VectorXd z = VectorXd::Zero(1);
    traj.steps.push_back({0, z, z, z, z});
    traj.prefix_x = {0.0};
    double prefix = 1.0;
    for (int t = 1; t <= 5 && !c.failed(); ++t) {
        prefix = c.alpha() * std::max(c.q(), prefix) * 2.0;
        traj.steps.push_back({t, VectorXd::Constant(1, 1.0), z, z, z});
        traj.prefix_x.push_back(prefix);
        c.act(traj, t);
    }
    CHECK(c.failed());
    CHECK(c.failure_reason() == "candidate controllers exhausted");
}

TEST_CASE("strong stabilizability: kappa=1 deadbeat construction") {
    auto [sys, cert] = make_strongly_stabilizable_instance(1.0, 2, 2, 5);
    CHECK(cert.Lambda.norm() == 0.0);  // 1 - 1/kappa = 0 forces Lambda = 0
    CHECK((sys.A + sys.B * cert.K_star).norm() < 1e-12);
    CHECK(verify_strong_stabilizability(sys.A, sys.B, cert.K_star, cert.H, cert.Lambda,
                                        cert.kappa)
              .empty());
}

TEST_CASE("strong stabilizability: 1-D hand assembly") {
    // Lambda = 0.5, H = 1, K* = 1, B = 1 -> A = 0.5 - 1 = -0.5.
    MatrixXd H = MatrixXd::Identity(1, 1);
    MatrixXd Lam = MatrixXd::Constant(1, 1, 0.5);
    MatrixXd Ks = MatrixXd::Identity(1, 1);
    MatrixXd B = MatrixXd::Identity(1, 1);
    MatrixXd A = H * Lam * H.inverse() - B * Ks;
    CHECK_THAT(A(0, 0), WithinAbs(-0.5, 1e-15));
    CHECK(verify_strong_stabilizability(A, B, Ks, H, Lam, 2.0).empty());
}

TEST_CASE("strong stabilizability: generated certificates verify") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        auto [sys, cert] = make_strongly_stabilizable_instance(2.0, 2, 2, seed);
        auto v = verify_strong_stabilizability(sys.A, sys.B, cert.K_star, cert.H, cert.Lambda,
                                               cert.kappa);
        CHECK(v.empty());
    }
}

TEST_CASE("verify_strong_stabilizability flags violations") {
    auto [sys, cert] = make_strongly_stabilizable_instance(2.0, 2, 2, 9);
    // kappa = 1 makes the Lambda cap zero: any nonzero Lambda violates.
    auto v = verify_strong_stabilizability(sys.A, sys.B, cert.K_star, cert.H,
                                           0.1 * MatrixXd::Identity(2, 2), 1.0);
    bool lam_flagged = false;
    for (const auto& viol : v) lam_flagged |= viol.condition.find("Lambda") != std::string::npos;
    CHECK(lam_flagged);

    auto v2 = verify_strong_stabilizability(sys.A, sys.B, 2.0 * cert.kappa * MatrixXd::Identity(2, 2),
                                            cert.H, cert.Lambda, cert.kappa);
    bool k_flagged = false;
    for (const auto& viol : v2) k_flagged |= viol.condition.find("K") != std::string::npos;
    CHECK(k_flagged);
}
