#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "twsbm/network.hpp"
#include "twsbm/profile.hpp"
#include "twsbm/variational.hpp"

namespace twsbm {

/// 1.1, 1.2, ..., 1.9
std::vector<double> default_rho_grid();

struct FitConfig {
    int communities = 3;
    std::vector<double> rho_grid = default_rho_grid();
    /// One weight per covariate; empty means 0.5 for every covariate.
    Eigen::VectorXd lambda;
    /// 0 picks 30 for networks without covariates and 10 otherwise.
    int starts = 0;
    int max_iter = 200;
    double tol = 1e-8;
    double init_confidence = 0.9;
    int split_merge_rounds = 5;
    std::uint64_t seed = 1;
    int threads = 1;
    Step1Options step1;

    void validate() const;
    Eigen::VectorXd lambda_for(int covariates) const;
    int starts_for(int covariates) const;
};

struct RhoDiagnostics {
    double rho = 0.0;
    bool ok = false;
    std::string error;
    double loglik = 0.0;
    double elbo = 0.0;
    double phi = 0.0;
    int iterations = 0;
    int step1_iterations = 0;
    double step1_objective = 0.0;
    int best_start = 0;
    int refinements = 0;
    bool converged = false;
    bool phi_at_boundary = false;
    std::vector<double> trace;
};

struct FitResult {
    double rho_hat = 0.0;
    double phi_hat = 0.0;
    Eigen::MatrixXd beta0;  // K x K
    Eigen::MatrixXd eta;    // q x p
    Eigen::MatrixXd beta_t; // T x p
    Eigen::MatrixXd tau;    // n x K
    Eigen::VectorXd pi;
    std::vector<int> labels;
    double loglik = 0.0;
    double elbo = 0.0;
    int iterations = 0;
    bool phi_at_boundary = false;
    std::vector<double> times;
    std::vector<RhoDiagnostics> per_rho;

    int nodes() const noexcept { return static_cast<int>(tau.rows()); }
    int communities() const noexcept { return static_cast<int>(tau.cols()); }
    int covariates() const noexcept { return static_cast<int>(eta.cols()); }

    /// Fitted beta(t) at any t within the span of the fitted time grid.
    Eigen::VectorXd beta_at(double t) const;
};

/// Two-step fit at every rho in the grid (Step 1 for beta(t), variational
/// Step 2 for tau, pi, beta0, phi), keeping the rho with the largest joint
/// log-likelihood at the hard labels. A rho whose fit fails numerically is
/// recorded in per_rho and skipped; NumericalError if all fail.
FitResult fit(const NetworkData& data, const FitConfig& config);

/// Key-value header followed by [section] blocks of CSV.
void write_result(const std::filesystem::path& path, const FitResult& result);
FitResult read_result(const std::filesystem::path& path);

}  // namespace twsbm
