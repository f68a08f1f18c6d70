#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mlds/exploration.hpp"

using namespace mlds;

namespace {

VectorXd random_unit(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    VectorXd v(d);
    do {
        for (int i = 0; i < d; ++i) v(i) = g(rng);
    } while (v.norm() < 1e-9);
    return v / v.norm();
}

double dist_to_net(const VectorXd& x, const std::vector<VectorXd>& net) {
    double best = 1e300;
    for (const auto& v : net) best = std::min(best, (x - v).norm());
    return best;
}

}  // namespace

TEST_CASE("sphere_net d=1 eps=0.5 is exactly {+1, -1}") {
    auto net = sphere_net(0.5, 1);
    REQUIRE(net.size() == 2);
    std::set<double> vals{net[0](0), net[1](0)};
    CHECK(vals == std::set<double>{-1.0, 1.0});
}

TEST_CASE("sphere_net eps >= 2: one point suffices") {
    for (int d : {1, 3, 5}) {
        auto net = sphere_net(2.0, d);
        REQUIRE(net.size() == 1);
        CHECK_THAT(net[0].norm(), Catch::Matchers::WithinAbs(1.0, 1e-14));
    }
}

TEST_CASE("sphere_net covering: Monte-Carlo over random unit vectors") {
    std::mt19937_64 rng(7);
    for (int d : {2, 3}) {
        auto net = sphere_net(0.5, d);
        for (int k = 0; k < 10000; ++k) {
            VectorXd x = random_unit(d, rng);
            CHECK(dist_to_net(x, net) <= 0.5);
        }
    }
}

TEST_CASE("sphere_net members are unit vectors, no duplicates") {
    auto net = sphere_net(0.5, 3);
    for (const auto& v : net) CHECK_THAT(v.norm(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (std::size_t i = 0; i < net.size(); ++i)
        for (std::size_t j = i + 1; j < net.size(); ++j)
            CHECK((net[i] - net[j]).norm() > 1e-9);
}

TEST_CASE("sphere_net argument validation and size cap") {
    CHECK_THROWS_AS(sphere_net(0.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(sphere_net(0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(sphere_net(1e-4, 6, 1000), std::length_error);
}

TEST_CASE("standard_basis_set") {
    auto s = standard_basis_set(3);
    CHECK(s.kind == ExplorationKind::StandardBasis);
    REQUIRE(s.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(s.vectors[i] == VectorXd::Unit(3, i));
}

TEST_CASE("eps_net_half_set refuses d > 6") {
    CHECK_THROWS_AS(eps_net_half_set(7), std::invalid_argument);
    auto s = eps_net_half_set(2);
    CHECK(s.kind == ExplorationKind::EpsNetHalf);
    CHECK(s.size() >= 2);
}
