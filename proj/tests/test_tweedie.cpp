#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "twsbm/errors.hpp"
#include "twsbm/tweedie.hpp"

using namespace twsbm;

TEST_CASE("compound parameters round trip") {
    for (double mu : {0.3, 1.0, 4.0})
        for (double phi : {0.5, 2.0})
            for (double rho : {1.1, 1.5, 1.9}) {
                const TweedieParams p(mu, phi, rho);
                const CompoundParams c = to_compound(p);
                // mean and variance of the compound law
                CHECK(c.lambda() * c.alpha() * c.gamma() == doctest::Approx(mu).epsilon(1e-12));
                CHECK(c.lambda() * c.alpha() * (c.alpha() + 1) * c.gamma() * c.gamma() ==
                      doctest::Approx(p.variance()).epsilon(1e-12));
                const TweedieParams back = from_compound(c);
                CHECK(back.mu() == doctest::Approx(mu).epsilon(1e-12));
                CHECK(back.phi() == doctest::Approx(phi).epsilon(1e-12));
                CHECK(back.rho() == doctest::Approx(rho).epsilon(1e-12));
            }
}

TEST_CASE("rho = 1.5 gives gamma shape 1") {
    const CompoundParams c = to_compound(TweedieParams(2.0, 1.0, 1.5));
    CHECK(c.alpha() == doctest::Approx(1.0));
    CHECK(c.lambda() == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(TweedieParams(1.0, 1.0, 2.0), ConfigError);
    CHECK_THROWS_AS(TweedieParams(1.0, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(TweedieParams(0.0, 1.0, 1.5), ConfigError);
    CHECK_THROWS_AS(TweedieParams(1.0, -1.0, 1.5), ConfigError);
    CHECK_THROWS_AS(log_density(-1.0, TweedieParams(1.0, 1.0, 1.5)), std::domain_error);
}

TEST_CASE("log density against the mixture sum") {
    for (double rho : {1.2, 1.5, 1.8})
        for (double phi : {0.5, 1.0, 2.0})
            for (double mu : {0.5, 2.0})
                for (double y : {0.0, 1e-3, 0.4, 1.0, 3.0, 12.0}) {
                    const double got = log_density(y, TweedieParams(mu, phi, rho));
                    const double want = static_cast<double>(oracle::compound_log_density(y, mu, phi, rho));
                    CHECK(got == doctest::Approx(want).epsilon(1e-9));
                }
}

TEST_CASE("zero response carries the atom exp(-lambda)") {
    const TweedieParams p(1.7, 0.8, 1.3);
    CHECK(log_density(0.0, p) == doctest::Approx(-to_compound(p).lambda()).epsilon(1e-14));
    CHECK(log_series(0.0, 0.8, 1.3) == 0.0);
}

TEST_CASE("density integrates to one with the atom") {
    const TweedieParams p(1.3, 0.7, 1.4);
    const double atom = std::exp(log_density(0.0, p));
    const double cont = oracle::integrate([&](double y) { return std::exp(log_density(y, p)); }, 0.0, 60.0);
    CHECK(atom + cont == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("series sum matches per-response evaluation and its derivatives") {
    const std::vector<double> ys{0.05, 0.7, 1.9, 4.2, 11.0};
    SeriesSum sum(1.35, ys);
    for (double phi : {0.2, 1.0, 3.0}) {
        double want = 0.0;
        for (double y : ys) want += log_series(y, phi, 1.35);
        CHECK(sum(phi) == doctest::Approx(want).epsilon(1e-12));

        const double h = 1e-4, psi = std::log(phi);
        const double up = sum(std::exp(psi + h)), mid = sum(phi), down = sum(std::exp(psi - h));
        const SeriesMoments m = sum.moments(phi);
        CHECK(m.value == doctest::Approx(mid).epsilon(1e-12));
        CHECK(m.d1 == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
        CHECK(m.d2 == doctest::Approx((up - 2 * mid + down) / (h * h)).epsilon(1e-4));
    }
}

TEST_CASE("series with a tiny dispersion stays finite") {
    const double v = log_series(50.0, 0.01, 1.5);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(static_cast<double>(oracle::compound_log_density(50.0L, 50.0L, 0.01L, 1.5L) -
                                                   log_density_kernel(50.0, 50.0, 0.01, 1.5)))
                   .epsilon(1e-8));
}

TEST_CASE("sampling is seeded and non-negative with exact zeros") {
    Rng a(42), b(42);
    const TweedieParams p(0.5, 1.0, 1.5);
    int zeros = 0;
    for (int i = 0; i < 1000; ++i) {
        const double x = sample(p, a);
        CHECK(x == sample(p, b));
        CHECK(x >= 0.0);
        zeros += x == 0.0;
    }
    CHECK(zeros > 0);
}
