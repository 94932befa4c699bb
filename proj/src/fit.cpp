#include "twsbm/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "twsbm/errors.hpp"
#include "twsbm/io.hpp"
#include "twsbm/numeric.hpp"
#include "twsbm/parallel.hpp"

namespace twsbm {

std::vector<double> default_rho_grid() {
    std::vector<double> g;
    for (int i = 11; i <= 19; ++i) g.push_back(i / 10.0);
    return g;
}

void FitConfig::validate() const {
    if (communities < 1) throw ConfigError("K must be at least 1");
    if (rho_grid.empty()) throw ConfigError("rho grid is empty");
    for (double r : rho_grid)
        if (!(r > 1.0 && r < 2.0)) throw ConfigError("rho grid values must lie in (1,2)");
    if (starts < 0) throw ConfigError("starts must be >= 1");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (!(init_confidence > 0.0 && init_confidence <= 1.0)) throw ConfigError("init confidence must be in (0,1]");
    for (Eigen::Index u = 0; u < lambda.size(); ++u)
        if (!(lambda(u) >= 0.0)) throw ConfigError("lambda values must be non-negative");
}

Eigen::VectorXd FitConfig::lambda_for(int covariates) const {
    if (lambda.size() == 0) return Eigen::VectorXd::Constant(covariates, 0.5);
    if (lambda.size() == 1) return Eigen::VectorXd::Constant(covariates, lambda(0));
    if (lambda.size() != covariates)
        throw ConfigError("lambda has " + std::to_string(lambda.size()) + " values for " +
                          std::to_string(covariates) + " covariates");
    return lambda;
}

int FitConfig::starts_for(int covariates) const {
    if (starts > 0) return starts;
    return covariates == 0 ? 30 : 10;
}

Eigen::VectorXd FitResult::beta_at(double t) const {
    return CoefficientModel::for_grid(TimeGrid(times)).at(t, eta);
}

namespace {

struct GridPoint {
    std::optional<Step1Result> step1;
    std::optional<PairKernel> kernel;
};

std::string describe(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const NumericalError& err) {
        return err.what();
    }
}

// Communities ordered by descending pi (stable).
void sort_communities(FitResult& r) {
    const auto K = r.pi.size();
    std::vector<int> order(static_cast<std::size_t>(K));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r.pi(a) > r.pi(b); });
    std::vector<int> inverse(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) inverse[static_cast<std::size_t>(order[k])] = static_cast<int>(k);

    Eigen::VectorXd pi(K);
    Eigen::MatrixXd tau(r.tau.rows(), K), b0(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        pi(k) = r.pi(order[static_cast<std::size_t>(k)]);
        tau.col(k) = r.tau.col(order[static_cast<std::size_t>(k)]);
        for (Eigen::Index l = 0; l < K; ++l)
            b0(k, l) = r.beta0(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(l)]);
    }
    r.pi = pi;
    r.tau = tau;
    r.beta0 = b0;
    for (int& c : r.labels) c = inverse[static_cast<std::size_t>(c)];
}

}  // namespace

FitResult fit(const NetworkData& data, const FitConfig& config) {
    config.validate();
    const PairTable pairs = PairTable::from(data);
    const int p = pairs.covariate_count();
    const Eigen::VectorXd lambda = config.lambda_for(p);
    const CoefficientModel model = CoefficientModel::for_grid(data.network.grid());
    const int G = static_cast<int>(config.rho_grid.size());
    const int S = config.starts_for(p);

    // Step 1 per rho.
    std::vector<GridPoint> points(static_cast<std::size_t>(G));
    auto step1_errors = parallel_for(G, config.threads, [&](int g) {
        const double rho = config.rho_grid[static_cast<std::size_t>(g)];
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(g), 0));
        auto& pt = points[static_cast<std::size_t>(g)];
        pt.step1 = estimate_beta_t(pairs, model, rho, lambda, config.step1, rng);
        pt.kernel = PairKernel::build(pairs, pt.step1->beta, rho);
    });
    for (auto& e : step1_errors)
        if (e) {
            try {
                std::rethrow_exception(e);
            } catch (const NumericalError&) {
            }  // recorded below
        }

    // Step 2: every (rho, start) pair is an independent task.
    Step2Options opts;
    opts.communities = config.communities;
    opts.starts = S;
    opts.max_iter = config.max_iter;
    opts.tol = config.tol;
    opts.init_confidence = config.init_confidence;
    opts.split_merge_rounds = config.split_merge_rounds;
    std::vector<Step2Result> runs(static_cast<std::size_t>(G * S));
    auto step2_errors = parallel_for(G * S, config.threads, [&](int task) {
        const int g = task / S, s = task % S;
        const auto& pt = points[static_cast<std::size_t>(g)];
        if (!pt.kernel) return;
        auto& run = runs[static_cast<std::size_t>(task)];
        run = run_start(*pt.kernel, opts,
                        derive_seed(config.seed, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(s) + 1));
        run.start = s;
    });
    for (auto& e : step2_errors)
        if (e) {
            try {
                std::rethrow_exception(e);
            } catch (const NumericalError&) {
            }
        }

    // Best start per rho, then merge-then-split refinement.
    std::vector<std::optional<Step2Result>> refined(static_cast<std::size_t>(G));
    parallel_for(G, config.threads, [&](int g) {
        const Step2Result* top = nullptr;
        for (int s = 0; s < S; ++s) {
            const auto task = static_cast<std::size_t>(g * S + s);
            if (!step2_errors[task] && points[static_cast<std::size_t>(g)].kernel &&
                (!top || runs[task].elbo > top->elbo))
                top = &runs[task];
        }
        if (!top) return;
        try {
            refined[static_cast<std::size_t>(g)] = split_merge(*points[static_cast<std::size_t>(g)].kernel, *top, opts);
        } catch (const NumericalError&) {
            refined[static_cast<std::size_t>(g)] = *top;
        }
    });

    FitResult best;
    int best_g = -1;
    std::vector<const Step2Result*> chosen(static_cast<std::size_t>(G), nullptr);
    for (int g = 0; g < G; ++g) {
        RhoDiagnostics d;
        d.rho = config.rho_grid[static_cast<std::size_t>(g)];
        const auto& pt = points[static_cast<std::size_t>(g)];
        if (step1_errors[static_cast<std::size_t>(g)]) {
            d.error = "step 1: " + describe(step1_errors[static_cast<std::size_t>(g)]);
            best.per_rho.push_back(std::move(d));
            continue;
        }
        d.step1_iterations = pt.step1->iterations;
        d.step1_objective = pt.step1->objective;
        const Step2Result* top = nullptr;
        std::string failures;
        for (int s = 0; s < S; ++s) {
            const auto task = static_cast<std::size_t>(g * S + s);
            if (step2_errors[task]) {
                failures += (failures.empty() ? "" : "; ") + std::string("start ") + std::to_string(s + 1) + ": " +
                            describe(step2_errors[task]);
                continue;
            }
        }
        if (refined[static_cast<std::size_t>(g)]) top = &*refined[static_cast<std::size_t>(g)];
        if (!top) {
            d.error = "step 2: every start failed (" + failures + ")";
            best.per_rho.push_back(std::move(d));
            continue;
        }
        const auto labels = hard_labels(top->state.tau);
        d.ok = true;
        d.loglik = full_loglik(labels, top->state.pi, top->state.beta0, *pt.kernel, top->state.phi, top->log_a_sum);
        d.elbo = top->elbo;
        d.phi = top->state.phi;
        d.iterations = top->iterations;
        d.best_start = top->start;
        d.refinements = top->refinements;
        d.converged = top->converged;
        d.phi_at_boundary = top->phi_at_boundary;
        d.trace = top->trace;
        chosen[static_cast<std::size_t>(g)] = top;
        if (best_g < 0 || d.loglik > best.per_rho[static_cast<std::size_t>(best_g)].loglik) best_g = g;
        best.per_rho.push_back(std::move(d));
    }

    if (best_g < 0) {
        std::string msg = "fit failed at every rho:";
        for (const auto& d : best.per_rho) msg += "\n  rho = " + io::format_double(d.rho) + ": " + d.error;
        throw NumericalError(msg);
    }

    const auto& d = best.per_rho[static_cast<std::size_t>(best_g)];
    const auto& run = *chosen[static_cast<std::size_t>(best_g)];
    const auto& pt = points[static_cast<std::size_t>(best_g)];
    best.rho_hat = d.rho;
    best.phi_hat = run.state.phi;
    best.beta0 = run.state.beta0;
    best.tau = run.state.tau;
    best.pi = run.state.pi;
    best.labels = hard_labels(run.state.tau);
    best.eta = pt.step1->eta;
    best.beta_t = pt.step1->beta;
    best.loglik = d.loglik;
    best.elbo = d.elbo;
    best.iterations = d.iterations;
    best.phi_at_boundary = d.phi_at_boundary;
    best.times = data.network.grid().points();
    sort_communities(best);
    return best;
}

}  // namespace twsbm
