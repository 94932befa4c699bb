#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "twsbm/network.hpp"
#include "twsbm/profile.hpp"
#include "twsbm/tweedie.hpp"

namespace twsbm {

/// Pair-level sufficient statistics for fixed beta(t) and rho:
///   A_ij = sum_t y_ij(t) exp((1-rho) x_ij'beta(t)),  G_ij = sum_t exp((2-rho) x_ij'beta(t)),
/// as symmetric zero-diagonal n x n matrices, plus every positive response.
struct PairKernel {
    double rho = 1.5;
    Eigen::MatrixXd A;
    Eigen::MatrixXd G;
    std::vector<double> positive;

    static PairKernel build(const PairTable& pairs, const Eigen::MatrixXd& beta_eval, double rho);

    int nodes() const noexcept { return static_cast<int>(A.rows()); }
};

struct VariationalState {
    Eigen::MatrixXd tau;    // n x K
    Eigen::VectorXd pi;     // K
    Eigen::MatrixXd beta0;  // K x K symmetric
    double phi = 1.0;
};

/// Row-wise argmax of tau, ties to the smallest index.
std::vector<int> hard_labels(const Eigen::MatrixXd& tau);

/// One sweep over nodes in index order; each row is replaced by its exact
/// maximizer given the current values of all other rows. Rows are floored at
/// 1e-12 and renormalized.
Eigen::MatrixXd update_tau(const VariationalState& state, const PairKernel& kernel);

Eigen::VectorXd update_pi(const Eigen::MatrixXd& tau);

enum class EmptyBlockPolicy { Freeze, Throw };

/// beta0_kl = log(sum w A / sum w G) with weights w = tau_ik tau_jl + tau_il tau_jk.
/// Blocks with soft mass below 1e-8 (or no positive response mass) keep
/// their previous value under Freeze, or raise BlockError under Throw.
Eigen::MatrixXd update_beta0(const Eigen::MatrixXd& tau, const PairKernel& kernel, const Eigen::MatrixXd& previous,
                             EmptyBlockPolicy policy = EmptyBlockPolicy::Freeze);

/// sum_{i<j} [A_ij e^{(1-rho)b}/(1-rho) - G_ij e^{(2-rho)b}/(2-rho)], b = beta0(c_i, c_j).
double hard_kernel_sum(const std::vector<int>& labels, const Eigen::MatrixXd& beta0, const PairKernel& kernel);

struct PhiUpdate {
    double phi = 1.0;
    double log_a_sum = 0.0;  // sum log a(y, phi, rho) at the returned phi
    int iterations = 0;
    bool at_boundary = false;
};

inline constexpr double kPhiMin = 1e-4;
inline constexpr double kPhiMax = 1e4;

/// Maximizes sum log a(y, phi, rho) + S / phi over phi in [kPhiMin, kPhiMax],
/// with S = hard_kernel_sum at the given labels. Safeguarded Newton on log phi.
PhiUpdate update_phi(const std::vector<int>& labels, const Eigen::MatrixXd& beta0, const PairKernel& kernel,
                     SeriesSum& series, double phi_start);

/// sum tau log pi + sum log a + sum_{i<j} E_q[kernel]/phi - sum tau log tau.
double elbo(const VariationalState& state, const PairKernel& kernel, double log_a_sum);
double elbo(const VariationalState& state, const PairKernel& kernel, SeriesSum& series);

/// Joint log-likelihood at hard labels: sum log pi_{c_i} + sum log f(y | mu, phi, rho).
double full_loglik(const std::vector<int>& labels, const Eigen::VectorXd& pi, const Eigen::MatrixXd& beta0,
                   const PairKernel& kernel, double phi, double log_a_sum);
double full_loglik(const NetworkData& data, const CommunityLabels& labels, const Eigen::MatrixXd& beta0,
                   const Eigen::MatrixXd& beta_eval, const Eigen::VectorXd& pi, double phi, double rho);

struct Step2Options {
    int communities = 3;
    int starts = 10;
    int max_iter = 200;
    double tol = 1e-8;
    double init_confidence = 0.9;
    int threads = 1;
    /// Rounds of merge-then-split moves applied to the best start; 0 disables.
    int split_merge_rounds = 5;
};

struct Step2Result {
    VariationalState state;
    double elbo = 0.0;
    double log_a_sum = 0.0;
    int iterations = 0;
    bool converged = false;
    bool phi_at_boundary = false;
    int start = 0;
    int refinements = 0;  // accepted merge-then-split moves
    std::vector<double> trace;  // ELBO after initialization and after each iteration
};

/// Coordinate ascent (tau -> pi -> beta0 -> phi) from the given n x K tau.
Step2Result run_from(const PairKernel& kernel, Eigen::MatrixXd tau, const Step2Options& options);

/// Hard labels as rows with `confidence` on the label and the rest spread evenly.
Eigen::MatrixXd soften(const std::vector<int>& labels, int communities, double confidence);

/// run_from a random softened one-hot initialization drawn with `seed`.
Step2Result run_start(const PairKernel& kernel, const Step2Options& options, std::uint64_t seed);

/// Spectral bisection of `nodes` on A_ij / sqrt(G_ij); returns one side.
std::vector<int> bisect(const PairKernel& kernel, const std::vector<int>& nodes);

/// Repeatedly merges a cluster e into the cluster with the nearest beta0 row,
/// bisects another cluster c into c and e, and reruns coordinate ascent.
/// The best such move over all (e, c) replaces the state when it raises the ELBO.
Step2Result split_merge(const PairKernel& kernel, Step2Result start, const Step2Options& options);

/// Best of options.starts runs by final ELBO, then split_merge; start s uses derive_seed(seed, s).
/// Throws NumericalError if every start fails.
Step2Result fit_step2(const PairKernel& kernel, const Step2Options& options, std::uint64_t seed);
Step2Result fit_step2(const NetworkData& data, const Eigen::MatrixXd& beta_eval, double rho,
                      const Step2Options& options, std::uint64_t seed);

}  // namespace twsbm
