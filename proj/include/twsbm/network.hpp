#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "twsbm/tweedie.hpp"

namespace twsbm {

/// Strictly increasing observation times in [0,1].
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> points);

    /// T equally spaced points on [0,1] (a single point sits at 0).
    static TimeGrid uniform(int count);

    int size() const noexcept { return static_cast<int>(points_.size()); }
    double operator[](int i) const { return points_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& points() const noexcept { return points_; }

    /// Grid with the point at `index` removed.
    TimeGrid without(int index) const;

private:
    std::vector<double> points_;
};

/// T symmetric, non-negative, zero-diagonal n x n weight matrices.
class DynamicNetwork {
public:
    DynamicNetwork(TimeGrid grid, std::vector<Eigen::MatrixXd> weights);

    int nodes() const noexcept { return n_; }
    int times() const noexcept { return grid_.size(); }
    const TimeGrid& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& at(int t) const { return weights_[static_cast<std::size_t>(t)]; }
    const std::vector<Eigen::MatrixXd>& weights() const noexcept { return weights_; }

    /// Network restricted to every time point except `index`.
    DynamicNetwork without_time(int index) const;

private:
    int n_ = 0;
    TimeGrid grid_;
    std::vector<Eigen::MatrixXd> weights_;
};

/// p symmetric zero-diagonal pairwise covariate matrices; p may be 0.
class CovariateSet {
public:
    CovariateSet() = default;
    CovariateSet(int nodes, std::vector<Eigen::MatrixXd> matrices);

    int count() const noexcept { return static_cast<int>(matrices_.size()); }
    int nodes() const noexcept { return n_; }
    const Eigen::MatrixXd& at(int u) const { return matrices_[static_cast<std::size_t>(u)]; }
    const std::vector<Eigen::MatrixXd>& matrices() const noexcept { return matrices_; }

private:
    int n_ = 0;
    std::vector<Eigen::MatrixXd> matrices_;
};

/// Community assignment, stored 0-based in [0, K).
class CommunityLabels {
public:
    CommunityLabels(std::vector<int> labels, int communities);

    int size() const noexcept { return static_cast<int>(labels_.size()); }
    int communities() const noexcept { return k_; }
    int operator[](int i) const { return labels_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& values() const noexcept { return labels_; }

    static CommunityLabels single_group(int nodes);

private:
    std::vector<int> labels_;
    int k_;
};

/// Observed data handed to the estimators.
struct NetworkData {
    DynamicNetwork network;
    CovariateSet covariates;

    int nodes() const noexcept { return network.nodes(); }
    int times() const noexcept { return network.times(); }
    int covariate_count() const noexcept { return covariates.count(); }

    /// Checks that covariates (if any) share the node count.
    void validate() const;
};

enum class CovariateLaw { Uniform, Normal };

/// Coefficient curves used by the simulation designs.
class BetaCurve {
public:
    enum class Shape { Constant, Linear, Sine, DoubleT, SinePlusOne, HalfLinear, HalfSine };

    static BetaCurve constant(double value) { return BetaCurve(Shape::Constant, value); }
    explicit BetaCurve(Shape shape, double value = 0.0) : shape_(shape), value_(value) {}

    /// Accepts "2t-1", "sin", "2t", "sin+1", "0.5(2t-1)", "0.5sin" or a number.
    static BetaCurve parse(const std::string& text);
    std::string name() const;

    double operator()(double t) const;

private:
    Shape shape_;
    double value_;
};

struct SimulationConfig {
    int n = 50;
    int communities = 3;
    std::vector<double> pi{0.2, 0.3, 0.5};
    double beta0_diag = 1.0;
    double beta0_offdiag = 0.0;
    double phi = 1.0;
    double rho = 1.5;
    CovariateLaw law = CovariateLaw::Uniform;
    /// One curve per covariate; p = beta.size().
    std::vector<BetaCurve> beta;
    TimeGrid grid = TimeGrid::uniform(1);
    std::uint64_t seed = 1;

    int covariate_count() const noexcept { return static_cast<int>(beta.size()); }
    void validate() const;

    /// K x K intercept matrix with the configured diagonal/off-diagonal.
    Eigen::MatrixXd beta0() const;

    /// Block intercepts (diag, offdiag) of the six simulation scenarios.
    static std::pair<double, double> scenario(int index);

    /// T x p matrix of true coefficient values on the grid.
    Eigen::MatrixXd beta_on_grid() const;
};

struct SimulatedData {
    NetworkData data;
    CommunityLabels labels;
};

SimulatedData generate(const SimulationConfig& config, Rng& rng);

/// Seeds a generator from config.seed.
SimulatedData generate(const SimulationConfig& config);

/// (M + M^T)/2 per time point with the diagonal zeroed.
DynamicNetwork validate_and_symmetrize(const TimeGrid& grid, const std::vector<Eigen::MatrixXd>& raw);

/// Entries <= threshold become 0, larger entries become log(entry).
DynamicNetwork preprocess_trade(const DynamicNetwork& network, double threshold = 1.0);

}  // namespace twsbm
