#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "twsbm/errors.hpp"
#include "twsbm/evaluation.hpp"
#include "twsbm/fit.hpp"
#include "twsbm/numeric.hpp"
#include "twsbm/profile.hpp"
#include "twsbm/variational.hpp"

using namespace twsbm;

namespace {

SimulatedData small_data(std::uint64_t seed, int n = 20, int T = 1, int p = 0, double phi = 1.0, double rho = 1.5) {
    SimulationConfig c;
    c.n = n;
    c.seed = seed;
    c.phi = phi;
    c.rho = rho;
    c.grid = TimeGrid::uniform(T);
    for (int u = 0; u < p; ++u) c.beta.push_back(u % 2 ? BetaCurve::parse("sin") : BetaCurve::parse("2t-1"));
    return generate(c);
}

std::vector<int> random_labels(int n, int K, Rng& rng) {
    std::uniform_int_distribution<int> pick(0, K - 1);
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int& c : out) c = pick(rng);
    return out;
}

Eigen::MatrixXd random_tau(int n, int K, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Eigen::MatrixXd t(n, K);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) t(i, k) = u(rng);
        t.row(i) /= t.row(i).sum();
    }
    return t;
}

// ELBO by explicit loops over node pairs and block pairs.
double elbo_loops(const VariationalState& s, const PairKernel& kern) {
    const int n = kern.nodes();
    const auto K = s.tau.cols();
    const double rho = kern.rho;
    double v = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < K; ++k) v += s.tau(i, k) * (std::log(s.pi(k)) - std::log(s.tau(i, k)));
    for (double y : kern.positive) v += log_series(y, s.phi, rho);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = 0; k < K; ++k)
                for (int l = 0; l < K; ++l) {
                    const double b = s.beta0(k, l);
                    v += s.tau(i, k) * s.tau(j, l) *
                         (kern.A(i, j) * std::exp((1 - rho) * b) / (1 - rho) -
                          kern.G(i, j) * std::exp((2 - rho) * b) / (2 - rho)) /
                         s.phi;
                }
    return v;
}

}  // namespace

TEST_CASE("pair table ordering and offsets") {
    const auto sim = small_data(1, 5, 2, 2);
    const PairTable pt = PairTable::from(sim.data);
    CHECK(pt.pairs() == 10);
    CHECK(pt.first[0] == 0);
    CHECK(pt.second[0] == 1);
    CHECK(pt.first[9] == 3);
    CHECK(pt.second[9] == 4);
    CHECK(pt.y[1](4) == sim.data.network.at(1)(1, 2));
    Eigen::RowVectorXd b(2);
    b << 0.5, -2.0;
    const Eigen::VectorXd o = pt.offsets(b);
    CHECK(o(4) == doctest::Approx(0.5 * sim.data.covariates.at(0)(1, 2) - 2.0 * sim.data.covariates.at(1)(1, 2)));
}

TEST_CASE("block sums by brute force") {
    const auto sim = small_data(2, 12, 3, 1);
    const PairTable pt = PairTable::from(sim.data);
    Eigen::MatrixXd beta(3, 1);
    beta << 0.2, -0.1, 0.4;
    const double rho = 1.4;
    const BlockSums s = block_sums(pt, beta, rho, sim.labels);
    Eigen::MatrixXd th = Eigen::MatrixXd::Zero(3, 3), ga = Eigen::MatrixXd::Zero(3, 3);
    for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 12; ++i)
            for (int j = i + 1; j < 12; ++j) {
                int k = sim.labels[i], l = sim.labels[j];
                if (k > l) std::swap(k, l);
                const double o = sim.data.covariates.at(0)(i, j) * beta(t, 0);
                th(k, l) += sim.data.network.at(t)(i, j) * std::exp((1 - rho) * o);
                ga(k, l) += std::exp((2 - rho) * o);
            }
    for (int k = 0; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
            CHECK(s.theta(k, l) == doctest::Approx(th(k, l)).epsilon(1e-12));
            CHECK(s.gamma(l, k) == doctest::Approx(ga(k, l)).epsilon(1e-12));
        }
}

TEST_CASE("beta0 closed form maximizes the block objective") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    for (int rep = 0; rep < 20; ++rep) {
        const double rho = 1.1 + 0.8 * (rep % 5) / 4.0;
        Eigen::MatrixXd th(2, 2), ga(2, 2);
        th << u(rng), u(rng), 0, u(rng);
        ga << u(rng), u(rng), 0, u(rng);
        th(1, 0) = th(0, 1);
        ga(1, 0) = ga(0, 1);
        const Eigen::MatrixXd b = beta0_mle(th, ga);
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) {
                const double want = oracle::golden_max(
                    [&](double x) {
                        return th(k, l) * std::exp((1 - rho) * x) / (1 - rho) -
                               ga(k, l) * std::exp((2 - rho) * x) / (2 - rho);
                    },
                    -20, 20);
                CHECK(b(k, l) == doctest::Approx(want).epsilon(1e-6));
            }
    }
}

TEST_CASE("beta0_mle reports degenerate blocks") {
    Eigen::MatrixXd th(2, 2), ga(2, 2);
    th << 1, 1, 1, 0;
    ga << 1, 1, 1, 1;
    try {
        beta0_mle(th, ga);
        FAIL("expected BlockError");
    } catch (const BlockError& e) {
        CHECK(e.kind() == BlockError::Kind::AllZero);
        CHECK(e.k() == 1);
        CHECK(e.l() == 1);
    }
    ga(0, 1) = ga(1, 0) = 0;
    th(1, 1) = 1;
    CHECK_THROWS_AS(beta0_mle(th, ga), BlockError);
}

TEST_CASE("profile log-likelihood equals the log-likelihood kernel at the block MLE") {
    const auto sim = small_data(3, 15, 2, 1);
    Eigen::MatrixXd beta(2, 1);
    beta << 0.3, -0.6;
    const double rho = 1.6;
    const auto [th, ga] = theta_gamma_hat(sim.data, beta, rho, sim.labels);
    const Eigen::MatrixXd b0 = beta0_mle(th, ga);
    // (1/N) sum_pairs [y mu^(1-rho)/(1-rho) - mu^(2-rho)/(2-rho)] at mu = exp(b0 + x beta)
    double direct = 0.0;
    for (int t = 0; t < 2; ++t)
        for (int i = 0; i < 15; ++i)
            for (int j = i + 1; j < 15; ++j) {
                const double mu = std::exp(b0(sim.labels[i], sim.labels[j]) + sim.data.covariates.at(0)(i, j) * beta(t, 0));
                direct += sim.data.network.at(t)(i, j) * std::pow(mu, 1 - rho) / (1 - rho) - std::pow(mu, 2 - rho) / (2 - rho);
            }
    direct /= pair_count(15);
    CHECK(profile_loglik(sim.data, beta, rho, sim.labels) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("Holder ratio never exceeds one") {
    Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const auto sim = small_data(100 + rep, 25, 2, 1);
        const PairTable pt = PairTable::from(sim.data);
        Eigen::MatrixXd beta = Eigen::MatrixXd::Random(2, 1);
        for (double rho : {1.1, 1.5, 1.9}) {
            const CommunityLabels labels(random_labels(25, 4, rng), 4);
            CHECK(holder_ratio(block_sums(pt, beta, rho, labels), rho) <= 1.0 + 1e-12);
            CHECK(holder_ratio(block_sums(pt, beta, rho, CommunityLabels::single_group(25)), rho) ==
                  doctest::Approx(1.0));
        }
    }
}

TEST_CASE("Step-1 gradient against central differences") {
    Rng rng(21);
    const auto sim = small_data(7, 20, 6, 2);
    const PairTable pt = PairTable::from(sim.data);
    const CoefficientModel model = CoefficientModel::for_grid(sim.data.network.grid());
    Eigen::VectorXd lambda(2);
    lambda << 0.5, 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        const Step1Objective obj(pt, model, 1.3 + 0.2 * rep, random_labels(20, 3, rng), 3, lambda);
        const Eigen::VectorXd eta = 0.3 * Eigen::VectorXd::Random(obj.dimension());
        Eigen::VectorXd g;
        obj.value(eta, g);
        const Eigen::VectorXd fd = oracle::fd_gradient([&](const Eigen::VectorXd& e) { return obj.value(e); }, eta);
        CHECK((g - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
    }
}

TEST_CASE("Step 1 recovers a smooth coefficient and is label-strategy invariant") {
    SimulationConfig c;
    c.n = 60;
    c.grid = TimeGrid::uniform(6);
    c.beta = {BetaCurve::parse("2t-1")};
    c.seed = 4;
    const auto sim = generate(c);
    const PairTable pt = PairTable::from(sim.data);
    const CoefficientModel model = CoefficientModel::for_grid(c.grid);
    const Eigen::VectorXd lambda = Eigen::VectorXd::Constant(1, 0.5);
    Rng rng(1);
    Step1Options one;
    const Step1Result a = estimate_beta_t(pt, model, 1.5, lambda, one, rng);
    Step1Options random;
    random.labels = LabelStrategy::RandomMultinomial;
    const Step1Result b = estimate_beta_t(pt, model, 1.5, lambda, random, rng);
    CHECK((a.beta - c.beta_on_grid()).cwiseAbs().maxCoeff() < 0.15);
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 0.05);
    CHECK(a.gradient_norm < 1e-6 * (1.0 + std::abs(a.objective)));
}

TEST_CASE("Step 1 convergence failure carries the last iterate") {
    const auto sim = small_data(8, 20, 6, 1);
    const PairTable pt = PairTable::from(sim.data);
    const CoefficientModel model = CoefficientModel::for_grid(sim.data.network.grid());
    Step1Options o;
    o.max_iter = 1;
    Rng rng(1);
    try {
        estimate_beta_t(pt, model, 1.5, Eigen::VectorXd::Constant(1, 0.5), o, rng);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_iterate().rows() == model.size());
        CHECK(e.gradient_norm() > 0.0);
    }
}

TEST_CASE("kernel matrices by brute force") {
    const auto sim = small_data(9, 8, 3, 1);
    const PairTable pt = PairTable::from(sim.data);
    Eigen::MatrixXd beta(3, 1);
    beta << 0.1, 0.2, -0.3;
    const PairKernel k = PairKernel::build(pt, beta, 1.7);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double a = 0, g = 0;
            if (i != j)
                for (int t = 0; t < 3; ++t) {
                    const double o = sim.data.covariates.at(0)(i, j) * beta(t, 0);
                    a += sim.data.network.at(t)(i, j) * std::exp(-0.7 * o);
                    g += std::exp(0.3 * o);
                }
            CHECK(k.A(i, j) == doctest::Approx(a).epsilon(1e-13));
            CHECK(k.G(i, j) == doctest::Approx(g).epsilon(1e-13));
        }
}

TEST_CASE("ELBO matches explicit loops") {
    Rng rng(3);
    const auto sim = small_data(10, 12);
    const PairKernel k = PairKernel::build(PairTable::from(sim.data), Eigen::MatrixXd::Zero(1, 0), 1.5);
    VariationalState s;
    s.tau = random_tau(12, 3, rng);
    s.pi = update_pi(s.tau);
    s.beta0 = Eigen::MatrixXd::Random(3, 3);
    s.beta0 = (s.beta0 + s.beta0.transpose()).eval() / 2;
    s.phi = 0.8;
    SeriesSum series(1.5, k.positive);
    CHECK(elbo(s, k, series) == doctest::Approx(elbo_loops(s, k)).epsilon(1e-12));
}

TEST_CASE("coordinate updates do not decrease the ELBO") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const auto sim = small_data(200 + rep, 20);
        const PairKernel k = PairKernel::build(PairTable::from(sim.data), Eigen::MatrixXd::Zero(1, 0), 1.5);
        SeriesSum series(1.5, k.positive);
        VariationalState s;
        s.tau = random_tau(20, 3, rng);
        s.pi = update_pi(s.tau);
        s.beta0 = update_beta0(s.tau, k, Eigen::MatrixXd::Zero(3, 3));
        s.phi = 1.0;
        const double log_a = series(s.phi);
        double e = elbo(s, k, log_a);
        for (int it = 0; it < 5; ++it) {
            s.tau = update_tau(s, k);
            double next = elbo(s, k, log_a);
            CHECK(next >= e - 1e-9 * (1 + std::abs(e)));
            e = next;
            s.pi = update_pi(s.tau);
            next = elbo(s, k, log_a);
            CHECK(next >= e - 1e-9 * (1 + std::abs(e)));
            e = next;
            s.beta0 = update_beta0(s.tau, k, s.beta0);
            next = elbo(s, k, log_a);
            CHECK(next >= e - 1e-9 * (1 + std::abs(e)));
            e = next;
        }
        CHECK((s.tau.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(s.tau.minCoeff() >= 1e-13);
    }
}

TEST_CASE("empty block policy") {
    const auto sim = small_data(12, 10);
    const PairKernel k = PairKernel::build(PairTable::from(sim.data), Eigen::MatrixXd::Zero(1, 0), 1.5);
    Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(10, 3);
    tau.col(0).setOnes();
    Eigen::MatrixXd prev = Eigen::MatrixXd::Constant(3, 3, 0.25);
    const Eigen::MatrixXd b = update_beta0(tau, k, prev);
    CHECK(b(2, 2) == 0.25);
    CHECK(b(0, 1) == 0.25);
    CHECK(b(0, 0) != 0.25);
    CHECK_THROWS_AS(update_beta0(tau, k, prev, EmptyBlockPolicy::Throw), BlockError);
}

TEST_CASE("dispersion update against a golden-section search") {
    for (std::uint64_t seed : {31u, 32u, 33u}) {
        const auto sim = small_data(seed, 20, 2, 0, 0.5 + 0.5 * static_cast<double>(seed - 31), 1.4);
        const PairKernel k = PairKernel::build(PairTable::from(sim.data), Eigen::MatrixXd::Zero(2, 0), 1.4);
        SeriesSum series(1.4, k.positive);
        const Eigen::MatrixXd b0 = sim.labels.communities() == 3 ? SimulationConfig{}.beta0() : Eigen::MatrixXd();
        const std::vector<int>& labels = sim.labels.values();
        const PhiUpdate up = update_phi(labels, b0, k, series, 1.0);
        const double S = hard_kernel_sum(labels, b0, k);
        auto objective = [&](double psi) {
            double v = S / std::exp(psi);
            for (double y : k.positive) v += log_series(y, std::exp(psi), 1.4);
            return v;
        };
        const double want = std::exp(oracle::golden_max(objective, std::log(1e-3), std::log(1e2), 1e-10));
        CHECK(up.phi == doctest::Approx(want).epsilon(1e-6));
        CHECK_FALSE(up.at_boundary);
        CHECK(up.log_a_sum == doctest::Approx(series(up.phi)));
    }
}

TEST_CASE("joint log-likelihood equals the sum of log densities") {
    const auto sim = small_data(40, 10, 2, 1);
    Eigen::MatrixXd beta(2, 1);
    beta << 0.4, -0.4;
    Eigen::MatrixXd b0 = SimulationConfig{}.beta0();
    Eigen::VectorXd pi(3);
    pi << 0.2, 0.3, 0.5;
    double want = 0.0;
    for (int i = 0; i < 10; ++i) want += std::log(pi(sim.labels[i]));
    for (int t = 0; t < 2; ++t)
        for (int i = 0; i < 10; ++i)
            for (int j = i + 1; j < 10; ++j) {
                const double mu = std::exp(b0(sim.labels[i], sim.labels[j]) + sim.data.covariates.at(0)(i, j) * beta(t, 0));
                want += log_density(sim.data.network.at(t)(i, j), TweedieParams(mu, 0.7, 1.5));
            }
    CHECK(full_loglik(sim.data, sim.labels, b0, beta, pi, 0.7, 1.5) == doctest::Approx(want).epsilon(1e-11));
}

TEST_CASE("split-merge never lowers the ELBO") {
    const auto sim = small_data(50, 30, 1, 0, 0.5);
    const PairKernel k = PairKernel::build(PairTable::from(sim.data), Eigen::MatrixXd::Zero(1, 0), 1.5);
    Step2Options o;
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Step2Result start = run_start(k, o, derive_seed(9, s));
        const Step2Result refined = split_merge(k, start, o);
        CHECK(refined.elbo >= start.elbo);
    }
}

TEST_CASE("variational fit recovers planted communities") {
    const auto sim = small_data(60, 40, 1, 0, 0.5);
    Step2Options o;
    o.starts = 5;
    const Step2Result r = fit_step2(sim.data, Eigen::MatrixXd::Zero(1, 0), 1.5, o, 3);
    CHECK(nmi(hard_labels(r.state.tau), sim.labels.values()).nmi > 0.99);
    CHECK(r.converged);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(std::isfinite(r.trace[i]));
}

TEST_CASE("fit is deterministic, thread-count independent and serializes losslessly") {
    const auto sim = small_data(70, 30, 5, 1, 1.0);
    FitConfig c;
    c.rho_grid = {1.3, 1.5};
    c.starts = 3;
    c.seed = 5;
    c.threads = 1;
    const FitResult a = fit(sim.data, c);
    c.threads = 4;
    const FitResult b = fit(sim.data, c);
    CHECK(a.labels == b.labels);
    CHECK(a.beta0 == b.beta0);
    CHECK(a.phi_hat == b.phi_hat);
    CHECK(a.beta_t == b.beta_t);
    // communities ordered by decreasing proportion
    for (Eigen::Index k = 1; k < a.pi.size(); ++k) CHECK(a.pi(k - 1) >= a.pi(k));
    // the reported log-likelihood is the joint one at the hard labels
    const double direct = full_loglik(sim.data, CommunityLabels(a.labels, 3), a.beta0, a.beta_t, a.pi, a.phi_hat, a.rho_hat);
    CHECK(a.loglik == doctest::Approx(direct).epsilon(1e-10));

    const auto path = std::filesystem::temp_directory_path() / "twsbm_result_roundtrip.txt";
    write_result(path, a);
    const FitResult back = read_result(path);
    CHECK(back.labels == a.labels);
    CHECK(back.beta0 == a.beta0);
    CHECK(back.tau == a.tau);
    CHECK(back.beta_t == a.beta_t);
    CHECK(back.eta == a.eta);
    CHECK(back.phi_hat == a.phi_hat);
    CHECK(back.per_rho.size() == 2u);
    CHECK(back.per_rho[1].loglik == a.per_rho[1].loglik);
    CHECK(back.beta_at(0.5)(0) == doctest::Approx(a.beta_at(0.5)(0)));
}

TEST_CASE("fit config validation") {
    FitConfig c;
    c.rho_grid = {2.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.rho_grid = {};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = FitConfig{};
    c.lambda = Eigen::VectorXd::Constant(2, 0.1);
    CHECK_THROWS_AS(c.lambda_for(3), ConfigError);
    CHECK(c.lambda_for(2).size() == 2);
    CHECK(FitConfig{}.starts_for(0) == 30);
    CHECK(FitConfig{}.starts_for(1) == 10);
    CHECK(FitConfig{}.lambda_for(2)(1) == 0.5);
}
