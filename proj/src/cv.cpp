#include "twsbm/cv.hpp"

#include <cmath>
#include <limits>

#include "twsbm/errors.hpp"
#include "twsbm/numeric.hpp"
#include "twsbm/parallel.hpp"

namespace twsbm {

std::vector<double> default_lambda_grid() { return {0.01, 0.05, 0.1, 0.5, 1.0, 5.0}; }

Eigen::VectorXd held_out_beta(const CoefficientModel& training, const Eigen::MatrixXd& eta, double t) {
    const auto& g = training.grid();
    if (!(t >= g[0] && t <= g[g.size() - 1]))
        throw ConfigError("held-out time lies outside the training span");
    return training.at(t, eta);
}

double held_out_loss(const NetworkData& data, int time_index, const FitResult& fit, const Eigen::VectorXd& beta) {
    const int n = data.nodes();
    const auto& y = data.network.at(time_index);
    if (static_cast<int>(fit.labels.size()) != n) throw ConfigError("fit does not match the network size");
    if (beta.size() != data.covariate_count()) throw ConfigError("held-out coefficient has the wrong length");
    std::vector<double> positive;
    double kernel = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double eta = fit.beta0(fit.labels[static_cast<std::size_t>(i)], fit.labels[static_cast<std::size_t>(j)]);
            for (int u = 0; u < data.covariate_count(); ++u) eta += data.covariates.at(u)(i, j) * beta(u);
            kernel += log_density_kernel(y(i, j), std::exp(eta), fit.phi_hat, fit.rho_hat);
            if (y(i, j) > 0.0) positive.push_back(y(i, j));
        }
    SeriesSum series(fit.rho_hat, std::move(positive));
    return -(series(fit.phi_hat) + kernel);
}

CvReport cross_validate(const NetworkData& data, const FitConfig& config, const std::vector<double>& lambda_grid) {
    config.validate();
    const int T = data.times();
    if (T < 4) throw ConfigError("cross-validation needs at least 4 time points, got " + std::to_string(T));
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    for (double l : lambda_grid)
        if (!(l >= 0.0)) throw ConfigError("lambda values must be non-negative");

    CvReport report;
    report.lambda_grid = lambda_grid;
    report.folds_per_lambda = T - 2;
    const int L = static_cast<int>(lambda_grid.size());
    const int F = T - 2;
    report.folds.resize(static_cast<std::size_t>(L * F));

    const auto errors = parallel_for(L * F, config.threads, [&](int task) {
        const int li = task / F;
        const int v = task % F + 1;
        CvFold& fold = report.folds[static_cast<std::size_t>(task)];
        fold.lambda = lambda_grid[static_cast<std::size_t>(li)];
        fold.held_out = v;

        FitConfig cfg = config;
        cfg.threads = 1;
        cfg.lambda = Eigen::VectorXd::Constant(1, fold.lambda);
        cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(v));
        NetworkData train{data.network.without_time(v), data.covariates};
        try {
            const FitResult r = fit(train, cfg);
            const CoefficientModel model = CoefficientModel::for_grid(train.network.grid());
            const Eigen::VectorXd beta = held_out_beta(model, r.eta, data.network.grid()[v]);
            fold.loss = held_out_loss(data, v, r, beta);
            fold.rho_hat = r.rho_hat;
            fold.phi_hat = r.phi_hat;
            fold.ok = std::isfinite(fold.loss);
            if (!fold.ok) fold.error = "non-finite held-out loss";
        } catch (const NumericalError& e) {
            fold.error = e.what();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    report.cv_error.assign(static_cast<std::size_t>(L), std::numeric_limits<double>::infinity());
    int best = -1;
    for (int li = 0; li < L; ++li) {
        double sum = 0.0;
        bool ok = true;
        for (int f = 0; f < F; ++f) {
            const auto& fold = report.folds[static_cast<std::size_t>(li * F + f)];
            ok = ok && fold.ok;
            sum += fold.loss;
        }
        if (!ok) continue;
        const double err = sum / F;
        report.cv_error[static_cast<std::size_t>(li)] = err;
        if (best < 0) {
            best = li;
            continue;
        }
        const double cur = report.cv_error[static_cast<std::size_t>(best)];
        const double lam = lambda_grid[static_cast<std::size_t>(li)];
        const double best_lam = lambda_grid[static_cast<std::size_t>(best)];
        if (err < cur || (err == cur && lam > best_lam)) best = li;
    }
    if (best < 0) throw NumericalError("every lambda had a failing fold");
    report.lambda_star = lambda_grid[static_cast<std::size_t>(best)];
    return report;
}

}  // namespace twsbm
