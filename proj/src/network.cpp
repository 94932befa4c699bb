#include "twsbm/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "twsbm/errors.hpp"

namespace twsbm {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw ConfigError("time grid must contain at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double t = points_[i];
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("time points must lie in [0,1]");
        if (i > 0 && !(t > points_[i - 1]))
            throw ConfigError("time points must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(int count) {
    if (count < 1) throw ConfigError("time grid needs at least one point");
    std::vector<double> pts(static_cast<std::size_t>(count), 0.0);
    for (int i = 1; i < count; ++i) pts[static_cast<std::size_t>(i)] = static_cast<double>(i) / (count - 1);
    return TimeGrid(std::move(pts));
}

TimeGrid TimeGrid::without(int index) const {
    if (index < 0 || index >= size() || size() == 1) throw ConfigError("cannot drop that time point");
    std::vector<double> pts = points_;
    pts.erase(pts.begin() + index);
    return TimeGrid(std::move(pts));
}

DynamicNetwork::DynamicNetwork(TimeGrid grid, std::vector<Eigen::MatrixXd> weights)
    : grid_(std::move(grid)), weights_(std::move(weights)) {
    if (static_cast<int>(weights_.size()) != grid_.size())
        throw DataError("number of weight matrices does not match the time grid");
    n_ = static_cast<int>(weights_.front().rows());
    for (std::size_t t = 0; t < weights_.size(); ++t) {
        const auto& w = weights_[t];
        if (w.rows() != w.cols()) throw DataError("weight matrix " + std::to_string(t + 1) + " is not square");
        if (w.rows() != n_) throw DataError("weight matrices differ in size across time");
        for (int i = 0; i < n_; ++i) {
            if (w(i, i) != 0.0) throw DataError("weight matrices must have a zero diagonal");
            for (int j = i + 1; j < n_; ++j) {
                if (!std::isfinite(w(i, j)) || w(i, j) < 0.0)
                    throw DataError("weights must be finite and non-negative");
                if (w(i, j) != w(j, i)) throw DataError("weight matrices must be symmetric");
            }
        }
    }
    if (n_ < 2) throw DataError("a network needs at least two nodes");
}

DynamicNetwork DynamicNetwork::without_time(int index) const {
    std::vector<Eigen::MatrixXd> w = weights_;
    w.erase(w.begin() + index);
    return DynamicNetwork(grid_.without(index), std::move(w));
}

CovariateSet::CovariateSet(int nodes, std::vector<Eigen::MatrixXd> matrices)
    : n_(nodes), matrices_(std::move(matrices)) {
    for (std::size_t u = 0; u < matrices_.size(); ++u) {
        const auto& x = matrices_[u];
        if (x.rows() != n_ || x.cols() != n_)
            throw DataError("covariate " + std::to_string(u + 1) + " has " + std::to_string(x.rows()) +
                            " x " + std::to_string(x.cols()) + " entries, expected " + std::to_string(n_) +
                            " nodes");
        for (int i = 0; i < n_; ++i) {
            if (x(i, i) != 0.0) throw DataError("covariate matrices must have a zero diagonal");
            for (int j = i + 1; j < n_; ++j) {
                if (!std::isfinite(x(i, j))) throw DataError("covariate entries must be finite");
                if (x(i, j) != x(j, i)) throw DataError("covariate matrices must be symmetric");
            }
        }
    }
}

CommunityLabels::CommunityLabels(std::vector<int> labels, int communities)
    : labels_(std::move(labels)), k_(communities) {
    if (k_ < 1) throw ConfigError("need at least one community");
    for (int c : labels_)
        if (c < 0 || c >= k_) throw DataError("community label out of range");
}

CommunityLabels CommunityLabels::single_group(int nodes) {
    return CommunityLabels(std::vector<int>(static_cast<std::size_t>(nodes), 0), 1);
}

void NetworkData::validate() const {
    if (covariates.count() > 0 && covariates.nodes() != network.nodes())
        throw DataError("network has " + std::to_string(network.nodes()) + " nodes but covariates have " +
                        std::to_string(covariates.nodes()));
}

BetaCurve BetaCurve::parse(const std::string& text) {
    if (text == "2t-1") return BetaCurve(Shape::Linear);
    if (text == "sin") return BetaCurve(Shape::Sine);
    if (text == "2t") return BetaCurve(Shape::DoubleT);
    if (text == "sin+1") return BetaCurve(Shape::SinePlusOne);
    if (text == "0.5(2t-1)") return BetaCurve(Shape::HalfLinear);
    if (text == "0.5sin") return BetaCurve(Shape::HalfSine);
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) throw ConfigError("unknown coefficient curve '" + text + "'");
    return constant(value);
}

std::string BetaCurve::name() const {
    switch (shape_) {
        case Shape::Linear: return "2t-1";
        case Shape::Sine: return "sin";
        case Shape::DoubleT: return "2t";
        case Shape::SinePlusOne: return "sin+1";
        case Shape::HalfLinear: return "0.5(2t-1)";
        case Shape::HalfSine: return "0.5sin";
        case Shape::Constant: break;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value_);
    return buf;
}

double BetaCurve::operator()(double t) const {
    const double s = std::sin(2.0 * std::numbers::pi * t);
    switch (shape_) {
        case Shape::Constant: return value_;
        case Shape::Linear: return 2.0 * t - 1.0;
        case Shape::Sine: return s;
        case Shape::DoubleT: return 2.0 * t;
        case Shape::SinePlusOne: return s + 1.0;
        case Shape::HalfLinear: return 0.5 * (2.0 * t - 1.0);
        case Shape::HalfSine: return 0.5 * s;
    }
    return 0.0;
}

void SimulationConfig::validate() const {
    if (n < 2) throw ConfigError("simulation needs n >= 2");
    if (communities < 1) throw ConfigError("simulation needs K >= 1");
    if (static_cast<int>(pi.size()) != communities)
        throw ConfigError("pi must have one entry per community");
    double total = 0.0;
    for (double v : pi) {
        if (!(v >= 0.0)) throw ConfigError("pi entries must be non-negative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("pi must sum to 1");
    if (!(phi > 0.0)) throw ConfigError("phi must be positive");
    if (!(rho > 1.0 && rho < 2.0)) throw ConfigError("rho must lie in (1,2)");
}

Eigen::MatrixXd SimulationConfig::beta0() const {
    Eigen::MatrixXd b = Eigen::MatrixXd::Constant(communities, communities, beta0_offdiag);
    b.diagonal().setConstant(beta0_diag);
    return b;
}

std::pair<double, double> SimulationConfig::scenario(int index) {
    switch (index) {
        case 1: return {1.0, 0.0};
        case 2: return {0.5, -0.5};
        case 3: return {0.0, -1.0};
        case 4: return {0.5, 0.0};
        case 5: return {0.25, -0.25};
        case 6: return {0.0, -0.5};
        default: throw ConfigError("scenario must be 1..6");
    }
}

Eigen::MatrixXd SimulationConfig::beta_on_grid() const {
    Eigen::MatrixXd out(grid.size(), covariate_count());
    for (int t = 0; t < grid.size(); ++t)
        for (int u = 0; u < covariate_count(); ++u) out(t, u) = beta[static_cast<std::size_t>(u)](grid[t]);
    return out;
}

SimulatedData generate(const SimulationConfig& config, Rng& rng) {
    config.validate();
    const int n = config.n;
    const int p = config.covariate_count();
    const int T = config.grid.size();

    std::discrete_distribution<int> pick(config.pi.begin(), config.pi.end());
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& c : labels) c = pick(rng);

    std::vector<Eigen::MatrixXd> covs(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(n, n));
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : covs)
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double v = config.law == CovariateLaw::Uniform ? uniform(rng) : normal(rng);
                x(i, j) = v;
                x(j, i) = v;
            }

    const Eigen::MatrixXd b0 = config.beta0();
    const Eigen::MatrixXd beta = config.beta_on_grid();
    std::vector<Eigen::MatrixXd> weights(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(n, n));
    for (int t = 0; t < T; ++t) {
        auto& y = weights[static_cast<std::size_t>(t)];
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double eta = b0(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]);
                for (int u = 0; u < p; ++u) eta += covs[static_cast<std::size_t>(u)](i, j) * beta(t, u);
                const double v = sample(TweedieParams(std::exp(eta), config.phi, config.rho), rng);
                y(i, j) = v;
                y(j, i) = v;
            }
    }

    return {NetworkData{DynamicNetwork(config.grid, std::move(weights)), CovariateSet(n, std::move(covs))},
            CommunityLabels(std::move(labels), config.communities)};
}

SimulatedData generate(const SimulationConfig& config) {
    Rng rng(config.seed);
    return generate(config, rng);
}

DynamicNetwork validate_and_symmetrize(const TimeGrid& grid, const std::vector<Eigen::MatrixXd>& raw) {
    if (raw.empty()) throw DataError("no weight matrices supplied");
    const auto n = raw.front().rows();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(raw.size());
    for (std::size_t t = 0; t < raw.size(); ++t) {
        const auto& m = raw[t];
        if (m.rows() != m.cols()) throw DataError("weight matrix " + std::to_string(t + 1) + " is not square");
        if (m.rows() != n) throw DataError("weight matrices differ in size across time");
        Eigen::MatrixXd s = 0.5 * (m + m.transpose());
        s.diagonal().setZero();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (s(i, j) < 0.0 || std::isnan(s(i, j)))
                    throw DataError("negative weight after symmetrization at time " + std::to_string(t + 1) +
                                    ", entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
        out.push_back(std::move(s));
    }
    return DynamicNetwork(grid, std::move(out));
}

DynamicNetwork preprocess_trade(const DynamicNetwork& network, double threshold) {
    if (!(threshold >= 1.0)) throw ConfigError("trade threshold must be >= 1");
    std::vector<Eigen::MatrixXd> out = network.weights();
    for (auto& m : out) m = m.unaryExpr([threshold](double v) { return v > threshold ? std::log(v) : 0.0; });
    return DynamicNetwork(network.grid(), std::move(out));
}

}  // namespace twsbm
