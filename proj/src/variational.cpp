#include "twsbm/variational.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>
#include <limits>
#include <optional>

#include "twsbm/errors.hpp"
#include "twsbm/numeric.hpp"
#include "twsbm/parallel.hpp"

namespace twsbm {

namespace {

constexpr double kTauFloor = 1e-12;
constexpr double kMassFloor = 1e-8;

// a_kl = e^{(1-rho) b}/(1-rho), g_kl = e^{(2-rho) b}/(2-rho)
Eigen::MatrixXd coef_a(const Eigen::MatrixXd& beta0, double rho) {
    return ((1.0 - rho) * beta0.array()).exp().matrix() / (1.0 - rho);
}
Eigen::MatrixXd coef_g(const Eigen::MatrixXd& beta0, double rho) {
    return ((2.0 - rho) * beta0.array()).exp().matrix() / (2.0 - rho);
}

void check_state(const VariationalState& s, const PairKernel& k) {
    const auto K = s.tau.cols();
    if (s.tau.rows() != k.nodes() || s.pi.size() != K || s.beta0.rows() != K || s.beta0.cols() != K)
        throw ConfigError("variational state does not conform to the data");
    if (!(s.phi > 0.0)) throw ConfigError("dispersion must be positive");
}

}  // namespace

PairKernel PairKernel::build(const PairTable& pairs, const Eigen::MatrixXd& beta_eval, double rho) {
    if (beta_eval.rows() != pairs.time_count() || beta_eval.cols() != pairs.covariate_count())
        throw ConfigError("coefficient grid must be T x p");
    PairKernel k;
    k.rho = rho;
    k.A = Eigen::MatrixXd::Zero(pairs.n, pairs.n);
    k.G = Eigen::MatrixXd::Zero(pairs.n, pairs.n);
    const double r = rho - 1.0, s = 2.0 - rho;
    for (int v = 0; v < pairs.time_count(); ++v) {
        const Eigen::VectorXd o = pairs.offsets(beta_eval.row(v));
        const auto& y = pairs.y[static_cast<std::size_t>(v)];
        for (Eigen::Index e = 0; e < pairs.pairs(); ++e) {
            const int i = pairs.first[static_cast<std::size_t>(e)];
            const int j = pairs.second[static_cast<std::size_t>(e)];
            k.A(i, j) += y(e) * std::exp(-r * o(e));
            k.G(i, j) += std::exp(s * o(e));
            if (y(e) > 0.0) k.positive.push_back(y(e));
        }
    }
    k.A = k.A.triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
    k.A += k.A.transpose().eval();
    k.G = k.G.triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
    k.G += k.G.transpose().eval();
    return k;
}

std::vector<int> hard_labels(const Eigen::MatrixXd& tau) {
    std::vector<int> out(static_cast<std::size_t>(tau.rows()), 0);
    for (Eigen::Index i = 0; i < tau.rows(); ++i) {
        int best = 0;
        for (Eigen::Index k = 1; k < tau.cols(); ++k)
            if (tau(i, k) > tau(i, best)) best = static_cast<int>(k);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Eigen::MatrixXd update_tau(const VariationalState& state, const PairKernel& kernel) {
    check_state(state, kernel);
    const auto n = state.tau.rows();
    const auto K = state.tau.cols();
    Eigen::MatrixXd tau = state.tau;
    if (K == 1) return Eigen::MatrixXd::Ones(n, 1);

    const Eigen::MatrixXd a = coef_a(state.beta0, kernel.rho);
    const Eigen::MatrixXd g = coef_g(state.beta0, kernel.rho);
    Eigen::VectorXd log_pi(K);
    for (Eigen::Index k = 0; k < K; ++k) log_pi(k) = std::log(std::max(state.pi(k), 1e-300));

    Eigen::MatrixXd SA = kernel.A * tau;
    Eigen::MatrixXd SG = kernel.G * tau;
    Eigen::VectorXd f(K);
    for (Eigen::Index i = 0; i < n; ++i) {
        f = log_pi + (a * SA.row(i).transpose() - g * SG.row(i).transpose()) / state.phi;
        f.array() -= f.maxCoeff();
        Eigen::RowVectorXd row = f.array().exp().transpose();
        row /= row.sum();
        row = row.cwiseMax(kTauFloor);
        row /= row.sum();
        const Eigen::RowVectorXd delta = row - tau.row(i);
        tau.row(i) = row;
        SA.noalias() += kernel.A.col(i) * delta;
        SG.noalias() += kernel.G.col(i) * delta;
    }
    return tau;
}

Eigen::VectorXd update_pi(const Eigen::MatrixXd& tau) {
    if (tau.rows() == 0) throw ConfigError("tau has no rows");
    return tau.colwise().mean().transpose();
}

Eigen::MatrixXd update_beta0(const Eigen::MatrixXd& tau, const PairKernel& kernel, const Eigen::MatrixXd& previous,
                             EmptyBlockPolicy policy) {
    const auto K = tau.cols();
    if (tau.rows() != kernel.nodes() || previous.rows() != K || previous.cols() != K)
        throw ConfigError("update_beta0: dimensions do not conform");
    const Eigen::MatrixXd TA = tau.transpose() * kernel.A * tau;
    const Eigen::MatrixXd TG = tau.transpose() * kernel.G * tau;
    const Eigen::VectorXd col = tau.colwise().sum().transpose();
    const Eigen::MatrixXd self = tau.transpose() * tau;
    Eigen::MatrixXd b = previous;
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = k; l < K; ++l) {
            const double mass = col(k) * col(l) - self(k, l);
            const bool empty = !(mass >= kMassFloor) || !(TG(k, l) > 0.0);
            const bool zero = !(TA(k, l) > 0.0);
            if (empty || zero) {
                if (policy == EmptyBlockPolicy::Throw)
                    throw BlockError(empty ? BlockError::Kind::Empty : BlockError::Kind::AllZero,
                                     static_cast<int>(k), static_cast<int>(l));
                continue;
            }
            b(k, l) = b(l, k) = std::log(TA(k, l) / TG(k, l));
        }
    return b;
}

double hard_kernel_sum(const std::vector<int>& labels, const Eigen::MatrixXd& beta0, const PairKernel& kernel) {
    const int n = kernel.nodes();
    if (static_cast<int>(labels.size()) != n) throw ConfigError("label vector length does not match");
    const Eigen::MatrixXd a = coef_a(beta0, kernel.rho);
    const Eigen::MatrixXd g = coef_g(beta0, kernel.rho);
    double S = 0.0;
    for (int j = 1; j < n; ++j) {
        const int cj = labels[static_cast<std::size_t>(j)];
        for (int i = 0; i < j; ++i) {
            const int ci = labels[static_cast<std::size_t>(i)];
            S += kernel.A(i, j) * a(ci, cj) - kernel.G(i, j) * g(ci, cj);
        }
    }
    return S;
}

PhiUpdate update_phi(const std::vector<int>& labels, const Eigen::MatrixXd& beta0, const PairKernel& kernel,
                     SeriesSum& series, double phi_start) {
    const double S = hard_kernel_sum(labels, beta0, kernel);
    const double lo = std::log(kPhiMin), hi = std::log(kPhiMax);
    double psi = std::clamp(std::log(phi_start), lo, hi);
    double a = lo, b = hi;  // the maximizer lies in [a, b]

    PhiUpdate out;
    for (out.iterations = 1; out.iterations <= 200; ++out.iterations) {
        const SeriesMoments m = series.moments(std::exp(psi));
        const double e = S * std::exp(-psi);
        const double d1 = m.d1 - e;
        const double d2 = m.d2 + e;
        if (d1 > 0.0)
            a = psi;
        else
            b = psi;
        double step = d2 < 0.0 ? -d1 / d2 : (d1 > 0.0 ? 1.0 : -1.0);
        step = std::clamp(step, -2.0, 2.0);
        double next = psi + step;
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - psi) < 1e-8 || b - a < 1e-8) {
            psi = next;
            break;
        }
        psi = next;
    }
    out.iterations = std::min(out.iterations, 200);
    out.phi = std::exp(psi);
    out.at_boundary = psi - lo < 1e-6 || hi - psi < 1e-6;
    out.log_a_sum = series(out.phi);
    return out;
}

double elbo(const VariationalState& state, const PairKernel& kernel, double log_a_sum) {
    check_state(state, kernel);
    const auto K = state.tau.cols();
    double value = log_a_sum;
    for (Eigen::Index k = 0; k < K; ++k) {
        const double lp = state.pi(k) > 0.0 ? std::log(state.pi(k)) : -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < state.tau.rows(); ++i) {
            const double t = state.tau(i, k);
            if (t > 0.0) value += t * (lp - std::log(t));
        }
    }
    const Eigen::MatrixXd TA = state.tau.transpose() * kernel.A * state.tau;
    const Eigen::MatrixXd TG = state.tau.transpose() * kernel.G * state.tau;
    const Eigen::MatrixXd a = coef_a(state.beta0, kernel.rho);
    const Eigen::MatrixXd g = coef_g(state.beta0, kernel.rho);
    value += 0.5 * ((a.array() * TA.array()).sum() - (g.array() * TG.array()).sum()) / state.phi;
    return value;
}

double elbo(const VariationalState& state, const PairKernel& kernel, SeriesSum& series) {
    return elbo(state, kernel, series(state.phi));
}

double full_loglik(const std::vector<int>& labels, const Eigen::VectorXd& pi, const Eigen::MatrixXd& beta0,
                   const PairKernel& kernel, double phi, double log_a_sum) {
    double value = log_a_sum + hard_kernel_sum(labels, beta0, kernel) / phi;
    for (int c : labels) value += std::log(pi(c));
    return value;
}

double full_loglik(const NetworkData& data, const CommunityLabels& labels, const Eigen::MatrixXd& beta0,
                   const Eigen::MatrixXd& beta_eval, const Eigen::VectorXd& pi, double phi, double rho) {
    if (pi.size() != labels.communities() || beta0.rows() != labels.communities())
        throw ConfigError("pi and beta0 must match the number of communities");
    const PairKernel kernel = PairKernel::build(PairTable::from(data), beta_eval, rho);
    SeriesSum series(rho, kernel.positive);
    return full_loglik(labels.values(), pi, beta0, kernel, phi, series(phi));
}

Step2Result run_from(const PairKernel& kernel, Eigen::MatrixXd tau, const Step2Options& options) {
    const int K = static_cast<int>(tau.cols());
    if (tau.rows() != kernel.nodes() || K < 1) throw ConfigError("initial tau does not conform to the data");
    Step2Result out;
    VariationalState& st = out.state;
    st.tau = std::move(tau);
    st.pi = update_pi(st.tau);
    st.beta0 = update_beta0(st.tau, kernel, Eigen::MatrixXd::Zero(K, K));
    SeriesSum series(kernel.rho, kernel.positive);
    PhiUpdate ph = update_phi(hard_labels(st.tau), st.beta0, kernel, series, 1.0);
    st.phi = ph.phi;
    double current = elbo(st, kernel, ph.log_a_sum);
    out.trace.push_back(current);

    for (out.iterations = 1; out.iterations <= options.max_iter; ++out.iterations) {
        st.tau = update_tau(st, kernel);
        st.pi = update_pi(st.tau);
        st.beta0 = update_beta0(st.tau, kernel, st.beta0);
        ph = update_phi(hard_labels(st.tau), st.beta0, kernel, series, st.phi);
        st.phi = ph.phi;
        const double next = elbo(st, kernel, ph.log_a_sum);
        if (!std::isfinite(next)) throw NumericalError("ELBO became non-finite");
        out.trace.push_back(next);
        const bool done = std::abs(next - current) < options.tol * (1.0 + std::abs(next));
        current = next;
        if (done) {
            out.converged = true;
            break;
        }
    }
    out.iterations = std::min(out.iterations, options.max_iter);
    out.elbo = current;
    out.log_a_sum = ph.log_a_sum;
    out.phi_at_boundary = ph.at_boundary;
    return out;
}

Eigen::MatrixXd soften(const std::vector<int>& labels, int communities, double confidence) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    Eigen::MatrixXd tau = Eigen::MatrixXd::Ones(n, communities);
    if (communities > 1) {
        tau.setConstant((1.0 - confidence) / (communities - 1));
        for (Eigen::Index i = 0; i < n; ++i) tau(i, labels[static_cast<std::size_t>(i)]) = confidence;
    }
    return tau;
}

Step2Result run_start(const PairKernel& kernel, const Step2Options& options, std::uint64_t seed) {
    const int n = kernel.nodes();
    const int K = options.communities;
    if (K < 1) throw ConfigError("need at least one community");
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, K - 1);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& c : labels) c = pick(rng);
    return run_from(kernel, soften(labels, K, options.init_confidence), options);
}

std::vector<int> bisect(const PairKernel& kernel, const std::vector<int>& nodes) {
    const auto m = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a + 1; b < m; ++b) {
            const int i = nodes[static_cast<std::size_t>(a)], j = nodes[static_cast<std::size_t>(b)];
            const double g = kernel.G(i, j);
            M(a, b) = M(b, a) = g > 0.0 ? kernel.A(i, j) / std::sqrt(g) : 0.0;
        }
    const double mean = M.sum() / (static_cast<double>(m) * (m - 1));
    M.array() -= mean;
    M.diagonal().setZero();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    const Eigen::VectorXd v = eig.eigenvectors().col(m - 1);
    std::vector<int> side;
    for (Eigen::Index a = 0; a < m; ++a)
        if (v(a) > 0.0) side.push_back(nodes[static_cast<std::size_t>(a)]);
    if (side.empty() || static_cast<Eigen::Index>(side.size()) == m) {
        side.assign(nodes.begin(), nodes.begin() + m / 2);
    }
    return side;
}

Step2Result split_merge(const PairKernel& kernel, Step2Result start, const Step2Options& options) {
    const int K = static_cast<int>(start.state.tau.cols());
    const int n = kernel.nodes();
    Step2Result best = std::move(start);
    for (int round = 0; round < options.split_merge_rounds && K > 1; ++round) {
        const auto labels = hard_labels(best.state.tau);
        const Eigen::MatrixXd& b0 = best.state.beta0;
        std::optional<Step2Result> winner;
        for (int e = 0; e < K; ++e) {
            int target = -1;
            double closest = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                if (k == e) continue;
                const double d = (b0.row(k) - b0.row(e)).squaredNorm();
                if (d < closest) closest = d, target = k;
            }
            for (int c = 0; c < K; ++c) {
                if (c == e) continue;
                std::vector<int> moved = labels;
                for (int& x : moved)
                    if (x == e) x = target;
                std::vector<int> members;
                for (int i = 0; i < n; ++i)
                    if (moved[static_cast<std::size_t>(i)] == c) members.push_back(i);
                if (members.size() < 2) continue;
                for (int i : bisect(kernel, members)) moved[static_cast<std::size_t>(i)] = e;
                Step2Result trial;
                try {
                    trial = run_from(kernel, soften(moved, K, options.init_confidence), options);
                } catch (const NumericalError&) {
                    continue;
                }
                const double bar = winner ? winner->elbo : best.elbo;
                if (trial.elbo > bar + options.tol * (1.0 + std::abs(bar))) winner = std::move(trial);
            }
        }
        if (!winner) break;
        winner->start = best.start;
        winner->refinements = best.refinements + 1;
        best = std::move(*winner);
    }
    return best;
}

Step2Result fit_step2(const PairKernel& kernel, const Step2Options& options, std::uint64_t seed) {
    if (options.starts < 1) throw ConfigError("need at least one start");
    std::vector<Step2Result> runs(static_cast<std::size_t>(options.starts));
    const auto errors = parallel_for(options.starts, options.threads, [&](int s) {
        runs[static_cast<std::size_t>(s)] = run_start(kernel, options, derive_seed(seed, static_cast<std::uint64_t>(s)));
        runs[static_cast<std::size_t>(s)].start = s;
    });
    int best = -1;
    std::string failures;
    for (int s = 0; s < options.starts; ++s) {
        if (errors[static_cast<std::size_t>(s)]) {
            try {
                std::rethrow_exception(errors[static_cast<std::size_t>(s)]);
            } catch (const NumericalError& e) {
                failures += "\n  start " + std::to_string(s + 1) + ": " + e.what();
            }
            continue;
        }
        if (best < 0 || runs[static_cast<std::size_t>(s)].elbo > runs[static_cast<std::size_t>(best)].elbo) best = s;
    }
    if (best < 0) throw NumericalError("every variational start failed:" + failures);
    return split_merge(kernel, std::move(runs[static_cast<std::size_t>(best)]), options);
}

Step2Result fit_step2(const NetworkData& data, const Eigen::MatrixXd& beta_eval, double rho,
                      const Step2Options& options, std::uint64_t seed) {
    return fit_step2(PairKernel::build(PairTable::from(data), beta_eval, rho), options, seed);
}

}  // namespace twsbm
