#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "twsbm/fit.hpp"

namespace twsbm {

/// 0.01, 0.05, 0.1, 0.5, 1, 5
std::vector<double> default_lambda_grid();

struct CvFold {
    double lambda = 0.0;
    int held_out = 0;  // 0-based time index, never 0 or T-1
    bool ok = false;
    double loss = 0.0;
    double rho_hat = 0.0;
    double phi_hat = 0.0;
    std::string error;
};

struct CvReport {
    std::vector<double> lambda_grid;
    std::vector<double> cv_error;  // +inf when any fold of that lambda failed
    std::vector<CvFold> folds;     // lambda-major, then held-out time
    double lambda_star = 0.0;
    int folds_per_lambda = 0;
    /// Source of phi and rho in the held-out loss.
    std::string loss_parameters = "fold fit";
};

/// Spline fitted on a training grid, evaluated at a held-out time inside it.
Eigen::VectorXd held_out_beta(const CoefficientModel& training, const Eigen::MatrixXd& eta, double t);

/// -sum_{i<j} log f(y_ij(t_v) | mu_ij, phi, rho) with
/// log mu_ij = beta0(c_i, c_j) + x_ij' beta, using the fit's labels, beta0, phi, rho.
double held_out_loss(const NetworkData& data, int time_index, const FitResult& fit, const Eigen::VectorXd& beta);

/// Leave-one-out over interior time points. The fold holding out time v
/// fits on the other T-1 points with seed derive_seed(config.seed, v), so
/// results do not depend on the order of lambda_grid. Ties in cv_error go
/// to the larger lambda.
CvReport cross_validate(const NetworkData& data, const FitConfig& config, const std::vector<double>& lambda_grid);

}  // namespace twsbm
