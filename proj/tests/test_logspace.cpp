#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mlds/logspace.hpp"

using namespace mlds;
using Eigen::VectorXd;

TEST_CASE("log_add_exp basic identities") {
    CHECK(log_add_exp(kNegInf, kNegInf) == kNegInf);
    CHECK(log_add_exp(0.0, kNegInf) == 0.0);
    CHECK(log_add_exp(kNegInf, 3.5) == 3.5);
    // ln(e^1 + e^1) = 1 + ln 2
    CHECK_THAT(log_add_exp(1.0, 1.0), Catch::Matchers::WithinAbs(1.0 + std::log(2.0), 1e-14));
    // Symmetric and huge-magnitude safe: ln(e^1000 + e^1) == 1000 up to ulp.
    CHECK_THAT(log_add_exp(1000.0, 1.0), Catch::Matchers::WithinAbs(1000.0, 1e-12));
    CHECK(log_add_exp(700.0, 710.0) == log_add_exp(710.0, 700.0));
}

TEST_CASE("log_sub_exp clamps at negative infinity") {
    CHECK(log_sub_exp(kNegInf, kNegInf) == kNegInf);
    CHECK(log_sub_exp(1.0, 1.0) == kNegInf);
    CHECK(log_sub_exp(1.0, 2.0) == kNegInf);  // clamped, never NaN
    double v = log_sub_exp(std::log(5.0), std::log(2.0));
    CHECK_THAT(v, Catch::Matchers::WithinAbs(std::log(3.0), 1e-14));
}

TEST_CASE("log_sq_norm handles vectors beyond double range") {
    VectorXd v(2);
    v << 3.0, 4.0;
    CHECK_THAT(log_sq_norm(v), Catch::Matchers::WithinAbs(std::log(25.0), 1e-14));

    // ||v||^2 for entries ~1e200 overflows doubles; log form must not.
    VectorXd big(2);
    big << 1e200, 1e200;
    double expect = 2.0 * std::log(1e200) + std::log(2.0);
    CHECK_THAT(log_sq_norm(big), Catch::Matchers::WithinRel(expect, 1e-14));

    CHECK(log_sq_norm(VectorXd::Zero(3)) == kNegInf);
}

TEST_CASE("EnergyAccumulator mirrors raw and log sums") {
    EnergyAccumulator acc;
    VectorXd a(2), b(2);
    a << 1.0, 0.0;
    b << 0.0, 2.0;
    acc.add(a);
    acc.add(b);
    CHECK_THAT(acc.sum_sq(), Catch::Matchers::WithinAbs(5.0, 1e-14));
    CHECK_THAT(acc.log_sum_sq(), Catch::Matchers::WithinAbs(std::log(5.0), 1e-14));
    CHECK_THAT(acc.norm(), Catch::Matchers::WithinAbs(std::sqrt(5.0), 1e-14));
    CHECK_THAT(acc.log_norm(), Catch::Matchers::WithinAbs(0.5 * std::log(5.0), 1e-14));

    // The log mirror keeps working after the raw mirror saturates.
    EnergyAccumulator huge;
    VectorXd x(1);
    x << 1e200;
    huge.add(x);
    huge.add(x);
    CHECK_THAT(huge.log_sum_sq(),
               Catch::Matchers::WithinRel(2.0 * std::log(1e200) + std::log(2.0), 1e-14));
}

TEST_CASE("exp_checked raises CertifiedOverflow instead of returning inf") {
    CHECK_THAT(exp_checked(1.0), Catch::Matchers::WithinRel(std::exp(1.0), 1e-15));
    CHECK_THROWS_AS(exp_checked(1000.0), CertifiedOverflow);
    try {
        exp_checked(1000.0);
    } catch (const CertifiedOverflow& e) {
        CHECK(e.log_value() == 1000.0);
    }
}
