#include "twsbm/profile.hpp"

#include <cmath>
#include <limits>

#include "twsbm/numeric.hpp"

namespace twsbm {

PairTable PairTable::from(const NetworkData& data) {
    data.validate();
    PairTable t;
    t.n = data.nodes();
    const auto P = static_cast<std::size_t>(pair_count(t.n));
    t.first.reserve(P);
    t.second.reserve(P);
    for (int i = 0; i < t.n; ++i)
        for (int j = i + 1; j < t.n; ++j) {
            t.first.push_back(i);
            t.second.push_back(j);
        }
    auto flatten = [&](const Eigen::MatrixXd& m) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(P));
        for (std::size_t e = 0; e < P; ++e) v(static_cast<Eigen::Index>(e)) = m(t.first[e], t.second[e]);
        return v;
    };
    for (const auto& w : data.network.weights()) t.y.push_back(flatten(w));
    for (const auto& x : data.covariates.matrices()) t.x.push_back(flatten(x));
    t.times = data.network.grid().points();
    return t;
}

Eigen::VectorXd PairTable::offsets(const Eigen::RowVectorXd& beta_row) const {
    Eigen::VectorXd o = Eigen::VectorXd::Zero(pairs());
    for (int u = 0; u < covariate_count(); ++u) o.noalias() += beta_row(u) * x[static_cast<std::size_t>(u)];
    return o;
}

CoefficientModel::CoefficientModel(TimeGrid grid, std::optional<SplineBasis> basis)
    : grid_(std::move(grid)), basis_(std::move(basis)) {
    if (basis_) {
        design_ = basis_->matrix();
        penalty_ = basis_->penalty();
    } else {
        design_ = Eigen::MatrixXd::Ones(grid_.size(), 1);
        penalty_ = Eigen::MatrixXd::Zero(1, 1);
    }
}

CoefficientModel CoefficientModel::for_grid(const TimeGrid& grid) {
    if (grid.size() >= 4) return CoefficientModel(grid, SplineBasis::build(grid));
    return CoefficientModel(grid, std::nullopt);
}

Eigen::MatrixXd CoefficientModel::evaluate(const Eigen::MatrixXd& eta) const {
    if (eta.rows() != size()) throw ConfigError("coefficient matrix does not match the coefficient model");
    return design_ * eta;
}

Eigen::VectorXd CoefficientModel::at(double t, const Eigen::MatrixXd& eta) const {
    if (basis_) return basis_->at(t, eta);
    if (eta.rows() != 1) throw ConfigError("coefficient matrix does not match the coefficient model");
    return eta.row(0).transpose();
}

BlockSums block_sums(const PairTable& pairs, const Eigen::MatrixXd& beta_eval, double rho,
                     const CommunityLabels& labels) {
    if (labels.size() != pairs.n) throw ConfigError("label vector length does not match the node count");
    if (beta_eval.rows() != pairs.time_count() || beta_eval.cols() != pairs.covariate_count())
        throw ConfigError("coefficient grid must be T x p");
    const int K = labels.communities();
    BlockSums s{Eigen::MatrixXd::Zero(K, K), Eigen::MatrixXd::Zero(K, K)};
    for (int v = 0; v < pairs.time_count(); ++v) {
        const Eigen::VectorXd o = pairs.offsets(beta_eval.row(v));
        const auto& y = pairs.y[static_cast<std::size_t>(v)];
        for (Eigen::Index e = 0; e < pairs.pairs(); ++e) {
            int k = labels[pairs.first[static_cast<std::size_t>(e)]];
            int l = labels[pairs.second[static_cast<std::size_t>(e)]];
            if (k > l) std::swap(k, l);
            s.theta(k, l) += y(e) * std::exp((1.0 - rho) * o(e));
            s.gamma(k, l) += std::exp((2.0 - rho) * o(e));
        }
    }
    s.theta = s.theta.triangularView<Eigen::Upper>().toDenseMatrix().selfadjointView<Eigen::Upper>();
    s.gamma = s.gamma.triangularView<Eigen::Upper>().toDenseMatrix().selfadjointView<Eigen::Upper>();
    return s;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> theta_gamma_hat(const NetworkData& data,
                                                             const Eigen::MatrixXd& beta_eval, double rho,
                                                             const CommunityLabels& labels) {
    const BlockSums s = block_sums(PairTable::from(data), beta_eval, rho, labels);
    const double N = pair_count(data.nodes());
    return {s.theta / N, s.gamma / N};
}

Eigen::MatrixXd beta0_mle(const Eigen::MatrixXd& theta_hat, const Eigen::MatrixXd& gamma_hat) {
    if (theta_hat.rows() != theta_hat.cols() || theta_hat.rows() != gamma_hat.rows() ||
        gamma_hat.rows() != gamma_hat.cols())
        throw ConfigError("theta and gamma must be matching square matrices");
    const auto K = theta_hat.rows();
    Eigen::MatrixXd b(K, K);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = k; l < K; ++l) {
            if (!(gamma_hat(k, l) > 0.0))
                throw BlockError(BlockError::Kind::Empty, static_cast<int>(k), static_cast<int>(l));
            if (!(theta_hat(k, l) > 0.0))
                throw BlockError(BlockError::Kind::AllZero, static_cast<int>(k), static_cast<int>(l));
            b(k, l) = b(l, k) = std::log(theta_hat(k, l) / gamma_hat(k, l));
        }
    return b;
}

double profile_loglik(const BlockSums& sums, double rho, double pair_count_value) {
    const double r = rho - 1.0, s = 2.0 - rho;
    double total = 0.0;
    const auto K = sums.theta.rows();
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = k; l < K; ++l) {
            const double th = sums.theta(k, l), ga = sums.gamma(k, l);
            if (ga > 0.0 && th > 0.0) total += std::pow(th, s) * std::pow(ga, r);
        }
    return -total / (r * s * pair_count_value);
}

double profile_loglik(const NetworkData& data, const Eigen::MatrixXd& beta_eval, double rho,
                      const CommunityLabels& labels) {
    return profile_loglik(block_sums(PairTable::from(data), beta_eval, rho, labels), rho,
                          pair_count(data.nodes()));
}

double holder_ratio(const BlockSums& sums, double rho) {
    const double r = rho - 1.0, s = 2.0 - rho;
    const auto K = sums.theta.rows();
    double th_tot = 0.0, ga_tot = 0.0;
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = k; l < K; ++l) {
            th_tot += sums.theta(k, l);
            ga_tot += sums.gamma(k, l);
        }
    double total = 0.0;
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = k; l < K; ++l)
            total += std::pow(sums.theta(k, l) / th_tot, s) * std::pow(sums.gamma(k, l) / ga_tot, r);
    return total;
}

Step1Objective::Step1Objective(const PairTable& pairs, const CoefficientModel& model, double rho,
                               std::vector<int> labels, int communities, Eigen::VectorXd lambda)
    : pairs_(pairs), model_(model), rho_(rho), blocks_(communities * communities) {
    if (static_cast<int>(labels.size()) != pairs.n) throw ConfigError("label vector length does not match");
    if (model.grid().size() != pairs.time_count()) throw ConfigError("coefficient model grid does not match data");
    if (lambda.size() != pairs.covariate_count())
        throw ConfigError("need one penalty weight per covariate, got " + std::to_string(lambda.size()) +
                          " for " + std::to_string(pairs.covariate_count()));
    block_.resize(static_cast<std::size_t>(pairs.pairs()));
    for (std::size_t e = 0; e < block_.size(); ++e)
        block_[e] = block_of(labels[static_cast<std::size_t>(pairs.first[e])],
                             labels[static_cast<std::size_t>(pairs.second[e])], communities);
    ridge_ = lambda;
    for (Eigen::Index u = 0; u < ridge_.size(); ++u) {
        if (lambda(u) < 0.0) throw ConfigError("penalty weights must be non-negative");
    }
}

double Step1Objective::value(const Eigen::VectorXd& eta) const { return evaluate(eta, nullptr); }

double Step1Objective::value(const Eigen::VectorXd& eta, Eigen::VectorXd& gradient) const {
    return evaluate(eta, &gradient);
}

double Step1Objective::evaluate(const Eigen::VectorXd& eta_vec, Eigen::VectorXd* gradient) const {
    const int q = model_.size();
    const int p = pairs_.covariate_count();
    const int T = pairs_.time_count();
    const Eigen::Map<const Eigen::MatrixXd> eta(eta_vec.data(), q, p);
    const Eigen::MatrixXd beta = model_.design() * eta;
    const double r = rho_ - 1.0, s = 2.0 - rho_;
    const auto P = pairs_.pairs();

    std::vector<Eigen::VectorXd> er(static_cast<std::size_t>(T)), es(static_cast<std::size_t>(T));
    std::vector<double> theta(static_cast<std::size_t>(blocks_), 0.0), gamma(static_cast<std::size_t>(blocks_), 0.0);
    for (int v = 0; v < T; ++v) {
        const Eigen::VectorXd o = pairs_.offsets(beta.row(v));
        auto& a = er[static_cast<std::size_t>(v)];
        auto& g = es[static_cast<std::size_t>(v)];
        a = pairs_.y[static_cast<std::size_t>(v)].array() * (-r * o.array()).exp();
        g = (s * o.array()).exp();
        for (Eigen::Index e = 0; e < P; ++e) {
            const auto b = static_cast<std::size_t>(block_[static_cast<std::size_t>(e)]);
            theta[b] += a(e);
            gamma[b] += g(e);
        }
    }

    double value = 0.0;
    std::vector<double> c_theta(theta.size(), 0.0), c_gamma(theta.size(), 0.0);
    for (std::size_t b = 0; b < theta.size(); ++b) {
        if (!(gamma[b] > 0.0) || !(theta[b] > 0.0)) continue;
        value -= std::pow(theta[b], s) * std::pow(gamma[b], r) / (r * s);
        c_theta[b] = std::pow(gamma[b] / theta[b], r);
        c_gamma[b] = std::pow(theta[b] / gamma[b], s);
    }

    Eigen::MatrixXd pen(q, p);
    for (int u = 0; u < p; ++u) {
        if (ridge_(u) > 0.0)
            pen.col(u) = ridge_(u) * (model_.penalty() * eta.col(u));
        else
            pen.col(u) = 1e-8 * eta.col(u);
        value -= 0.5 * eta.col(u).dot(pen.col(u));
    }

    if (gradient) {
        Eigen::MatrixXd G(T, p);
        Eigen::VectorXd w(P);
        for (int v = 0; v < T; ++v) {
            const auto& a = er[static_cast<std::size_t>(v)];
            const auto& g = es[static_cast<std::size_t>(v)];
            for (Eigen::Index e = 0; e < P; ++e) {
                const auto b = static_cast<std::size_t>(block_[static_cast<std::size_t>(e)]);
                w(e) = c_theta[b] * a(e) - c_gamma[b] * g(e);
            }
            for (int u = 0; u < p; ++u) G(v, u) = w.dot(pairs_.x[static_cast<std::size_t>(u)]);
        }
        const Eigen::MatrixXd grad = model_.design().transpose() * G - pen;
        *gradient = Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
    }
    return value;
}

Step1Result estimate_beta_t(const PairTable& pairs, const CoefficientModel& model, double rho,
                            const Eigen::VectorXd& lambda, const Step1Options& options, Rng& rng) {
    int K = 1;
    std::vector<int> labels(static_cast<std::size_t>(pairs.n), 0);
    if (options.labels == LabelStrategy::RandomMultinomial) {
        K = options.random_communities;
        if (K < 1) throw ConfigError("random label strategy needs K >= 1");
        std::uniform_int_distribution<int> pick(0, K - 1);
        for (int& c : labels) c = pick(rng);
    }

    const int q = model.size();
    const int p = pairs.covariate_count();
    Step1Objective objective(pairs, model, rho, labels, K, lambda);
    Step1Result out;
    out.eta = Eigen::MatrixXd::Zero(q, p);
    if (p == 0) {
        out.beta = Eigen::MatrixXd::Zero(pairs.time_count(), 0);
        out.objective = objective.value(Eigen::VectorXd());
        return out;
    }

    // BFGS on f = -objective with an inverse-Hessian approximation H.
    const Eigen::Index d = objective.dimension();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d), g(d), g_new(d);
    double F = objective.value(x, g);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
    bool fresh = true;

    int iter = 0;
    for (;; ++iter) {
        const double gnorm = g.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(F) || !std::isfinite(gnorm))
            throw NumericalError("Step-1 objective became non-finite at rho = " + std::to_string(rho));
        if (gnorm < options.gradient_tol * (1.0 + std::abs(F))) break;
        if (iter >= options.max_iter)
            throw ConvergenceError("Step-1 optimizer did not converge in " + std::to_string(options.max_iter) +
                                       " iterations (gradient norm " + std::to_string(gnorm) + ")",
                                   Eigen::Map<const Eigen::MatrixXd>(x.data(), q, p), gnorm);

        // ascent direction for the objective
        Eigen::VectorXd dir = H * g;
        double slope = g.dot(dir);
        if (!(slope > 0.0)) {
            H.setIdentity();
            fresh = true;
            dir = g;
            slope = g.squaredNorm();
        }
        double step = fresh ? std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>()) : 1.0;
        double F_new = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        for (int bt = 0; bt < 60; ++bt) {
            x_new = x + step * dir;
            F_new = objective.value(x_new, g_new);
            if (std::isfinite(F_new) && F_new >= F + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        if (!(std::isfinite(F_new) && F_new >= F + 1e-4 * step * slope)) {
            if (fresh)
                throw ConvergenceError("Step-1 line search failed at rho = " + std::to_string(rho),
                                       Eigen::Map<const Eigen::MatrixXd>(x.data(), q, p), gnorm);
            H.setIdentity();
            fresh = true;
            continue;
        }

        const Eigen::VectorXd sv = x_new - x;
        const Eigen::VectorXd yv = g - g_new;  // gradient change of f = -objective
        const double sy = sv.dot(yv);
        if (sy > 1e-12 * sv.norm() * yv.norm()) {
            if (fresh) H *= sy / yv.squaredNorm();
            const double rho_k = 1.0 / sy;
            const Eigen::VectorXd Hy = H * yv;
            H += (rho_k * rho_k * yv.dot(Hy) + rho_k) * (sv * sv.transpose()) -
                 rho_k * (Hy * sv.transpose() + sv * Hy.transpose());
            fresh = false;
        }
        x = x_new;
        g = g_new;
        F = F_new;
    }

    out.eta = Eigen::Map<const Eigen::MatrixXd>(x.data(), q, p);
    out.beta = model.evaluate(out.eta);
    out.objective = F;
    out.iterations = iter;
    out.gradient_norm = g.lpNorm<Eigen::Infinity>();
    return out;
}

}  // namespace twsbm
