#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "twsbm/cv.hpp"
#include "twsbm/errors.hpp"
#include "twsbm/variational.hpp"

using namespace twsbm;

namespace {

SimulatedData cv_data(std::uint64_t seed, int T = 6) {
    SimulationConfig c;
    c.n = 24;
    c.seed = seed;
    c.grid = TimeGrid::uniform(T);
    c.beta = {BetaCurve::constant(1.0)};
    return generate(c);
}

FitConfig quick() {
    FitConfig c;
    c.rho_grid = {1.5};
    c.starts = 2;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("fold structure") {
    const auto sim = cv_data(1);
    const CvReport r = cross_validate(sim.data, quick(), {0.1, 1.0});
    CHECK(r.folds_per_lambda == 4);
    CHECK(r.folds.size() == 8u);
    std::set<int> held;
    for (const auto& f : r.folds) {
        CHECK(f.held_out > 0);
        CHECK(f.held_out < 5);
        held.insert(f.held_out);
        CHECK(f.ok);
    }
    CHECK(held == std::set<int>{1, 2, 3, 4});
    CHECK(r.folds[0].lambda == 0.1);
    CHECK(r.folds[4].lambda == 1.0);
    CHECK(r.cv_error.size() == 2u);
    CHECK(r.lambda_star == (r.cv_error[1] <= r.cv_error[0] ? 1.0 : 0.1));
    double sum = 0.0;
    for (int f = 0; f < 4; ++f) sum += r.folds[static_cast<std::size_t>(f)].loss;
    CHECK(r.cv_error[0] == doctest::Approx(sum / 4));
}

TEST_CASE("fold results do not depend on the grid order") {
    const auto sim = cv_data(2);
    const CvReport a = cross_validate(sim.data, quick(), {0.1, 1.0});
    const CvReport b = cross_validate(sim.data, quick(), {1.0, 0.1});
    CHECK(a.cv_error[0] == b.cv_error[1]);
    CHECK(a.cv_error[1] == b.cv_error[0]);
    CHECK(a.lambda_star == b.lambda_star);
}

TEST_CASE("ties go to the larger lambda") {
    const auto sim = cv_data(3);
    const CvReport r = cross_validate(sim.data, quick(), {0.5, 0.5 + 1e-300, 0.5});
    CHECK(r.cv_error[0] == r.cv_error[2]);
    CHECK(r.lambda_star >= 0.5);
}

TEST_CASE("cross-validation preconditions") {
    const auto sim = cv_data(4, 3);
    CHECK_THROWS_AS(cross_validate(sim.data, quick(), {0.1}), ConfigError);
    const auto ok = cv_data(4);
    CHECK_THROWS_AS(cross_validate(ok.data, quick(), {}), ConfigError);
    CHECK_THROWS_AS(cross_validate(ok.data, quick(), {-1.0}), ConfigError);
}

TEST_CASE("held-out loss is the negative log density at the held-out time") {
    const auto sim = cv_data(5);
    FitConfig c = quick();
    const FitResult r = fit(sim.data, c);
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.9);
    double want = 0.0;
    const int n = sim.data.nodes();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double mu = std::exp(r.beta0(r.labels[static_cast<std::size_t>(i)], r.labels[static_cast<std::size_t>(j)]) +
                                       sim.data.covariates.at(0)(i, j) * 0.9);
            want -= log_density(sim.data.network.at(2)(i, j), TweedieParams(mu, r.phi_hat, r.rho_hat));
        }
    CHECK(held_out_loss(sim.data, 2, r, beta) == doctest::Approx(want).epsilon(1e-11));
}

TEST_CASE("held-out coefficient interpolates the training spline") {
    const TimeGrid train({0.0, 0.2, 0.6, 0.8, 1.0});
    const CoefficientModel m = CoefficientModel::for_grid(train);
    Eigen::MatrixXd eta(m.size(), 1);
    eta.col(0) = 1.5 * m.basis().greville().array() - 0.5;
    CHECK(held_out_beta(m, eta, 0.4)(0) == doctest::Approx(0.1));
    CHECK_THROWS_AS(held_out_beta(CoefficientModel::for_grid(TimeGrid({0.2, 0.4, 0.6, 0.8})), Eigen::MatrixXd::Zero(8, 1), 0.1),
                    ConfigError);
}
