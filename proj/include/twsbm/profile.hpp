#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "twsbm/errors.hpp"
#include "twsbm/network.hpp"
#include "twsbm/spline.hpp"

namespace twsbm {

/// Network responses and covariates flattened over unordered pairs i < j,
/// in row-major order (0,1), (0,2), ..., (n-2,n-1).
struct PairTable {
    int n = 0;
    std::vector<int> first;
    std::vector<int> second;
    std::vector<Eigen::VectorXd> y;  // one per time point
    std::vector<Eigen::VectorXd> x;  // one per covariate
    std::vector<double> times;

    static PairTable from(const NetworkData& data);

    Eigen::Index pairs() const noexcept { return static_cast<Eigen::Index>(first.size()); }
    int time_count() const noexcept { return static_cast<int>(y.size()); }
    int covariate_count() const noexcept { return static_cast<int>(x.size()); }

    /// x_ij^T beta(t) for every pair, where beta_row is beta(t)^T.
    Eigen::VectorXd offsets(const Eigen::RowVectorXd& beta_row) const;
};

/// Maps coefficients eta (q x p) to beta on the time grid (T x p). With T >= 4
/// this is the cubic spline basis; with fewer points the effect is constant
/// over time (q = 1, no penalty).
class CoefficientModel {
public:
    static CoefficientModel for_grid(const TimeGrid& grid);

    bool is_spline() const noexcept { return basis_.has_value(); }
    const SplineBasis& basis() const { return basis_.value(); }
    const TimeGrid& grid() const noexcept { return grid_; }
    int size() const noexcept { return static_cast<int>(design_.cols()); }
    const Eigen::MatrixXd& design() const noexcept { return design_; }
    const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }

    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& eta) const;
    /// beta(t) for any t in the grid's span.
    Eigen::VectorXd at(double t, const Eigen::MatrixXd& eta) const;

private:
    CoefficientModel(TimeGrid grid, std::optional<SplineBasis> basis);

    TimeGrid grid_;
    std::optional<SplineBasis> basis_;
    Eigen::MatrixXd design_;
    Eigen::MatrixXd penalty_;
};

/// Unordered block index of labels (k, l).
inline int block_of(int k, int l, int K) { return k <= l ? k * K + l : l * K + k; }

/// Raw block sums theta_kl = sum y exp((1-rho) x'beta) and
/// gamma_kl = sum exp((2-rho) x'beta) over pairs with {c_i, c_j} = {k, l},
/// stored symmetric.
struct BlockSums {
    Eigen::MatrixXd theta;
    Eigen::MatrixXd gamma;
};

BlockSums block_sums(const PairTable& pairs, const Eigen::MatrixXd& beta_eval, double rho,
                     const CommunityLabels& labels);

/// Block sums divided by the number of node pairs n(n-1)/2.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> theta_gamma_hat(const NetworkData& data,
                                                             const Eigen::MatrixXd& beta_eval, double rho,
                                                             const CommunityLabels& labels);

/// log(theta/gamma) entrywise. Throws BlockError for an empty block
/// (gamma == 0) or a block with only zero responses (theta == 0).
Eigen::MatrixXd beta0_mle(const Eigen::MatrixXd& theta_hat, const Eigen::MatrixXd& gamma_hat);

/// (1/((1-rho)(2-rho))) sum_{k<=l} theta_kl^(2-rho) gamma_kl^(rho-1) on the
/// scaled sums; empty blocks contribute 0.
double profile_loglik(const NetworkData& data, const Eigen::MatrixXd& beta_eval, double rho,
                      const CommunityLabels& labels);
double profile_loglik(const BlockSums& sums, double rho, double pair_count);

/// sum_{k<=l} (theta/theta_tot)^(2-rho) (gamma/gamma_tot)^(rho-1); at most 1.
double holder_ratio(const BlockSums& sums, double rho);

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, Eigen::MatrixXd last, double gradient_norm)
        : NumericalError(what), last_(std::move(last)), gradient_norm_(gradient_norm) {}

    const Eigen::MatrixXd& last_iterate() const noexcept { return last_; }
    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    Eigen::MatrixXd last_;
    double gradient_norm_;
};

enum class LabelStrategy { SingleGroup, RandomMultinomial };

struct Step1Options {
    LabelStrategy labels = LabelStrategy::SingleGroup;
    int random_communities = 3;
    int max_iter = 500;
    double gradient_tol = 1e-6;
};

/// Penalized profile objective for Step 1 on the unscaled sums:
///   sum_{k<=l} theta^(2-rho) gamma^(rho-1) / ((1-rho)(2-rho)) - (1/2) sum_u lambda_u eta_u' Omega eta_u
/// as a function of vec(eta) (column-major, q*p entries).
class Step1Objective {
public:
    Step1Objective(const PairTable& pairs, const CoefficientModel& model, double rho, std::vector<int> labels,
                   int communities, Eigen::VectorXd lambda);

    int dimension() const noexcept { return model_.size() * pairs_.covariate_count(); }
    double value(const Eigen::VectorXd& eta) const;
    double value(const Eigen::VectorXd& eta, Eigen::VectorXd& gradient) const;

private:
    double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* gradient) const;

    const PairTable& pairs_;
    const CoefficientModel& model_;
    double rho_;
    std::vector<int> block_;  // per pair
    int blocks_;
    Eigen::VectorXd ridge_;   // per covariate: lambda_u, or 1e-8 when lambda_u == 0
};

struct Step1Result {
    Eigen::MatrixXd eta;   // q x p
    Eigen::MatrixXd beta;  // T x p
    double objective = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;
};

/// Maximizes the Step-1 objective by BFGS with backtracking, from eta = 0.
/// Throws ConvergenceError after max_iter iterations.
Step1Result estimate_beta_t(const PairTable& pairs, const CoefficientModel& model, double rho,
                            const Eigen::VectorXd& lambda, const Step1Options& options, Rng& rng);

}  // namespace twsbm
