#pragma once

// Reference computations that share no code with the library.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// log f(y) of the compound Poisson-Gamma law, summing the mixture over the
// Poisson count in long double until the terms are negligible.
inline long double compound_log_density(long double y, long double mu, long double phi, long double rho) {
    const long double lambda = std::pow(mu, 2.0L - rho) / (phi * (2.0L - rho));
    const long double alpha = (2.0L - rho) / (rho - 1.0L);
    const long double gamma = phi * (rho - 1.0L) * std::pow(mu, rho - 1.0L);
    if (y == 0.0L) return -lambda;
    // log P(N = m) + log Gamma(y; m alpha, gamma)
    auto term = [&](long double m) {
        return -lambda + m * std::log(lambda) - std::lgamma(m + 1.0L) - std::lgamma(m * alpha) -
               m * alpha * std::log(gamma) + (m * alpha - 1.0L) * std::log(y) - y / gamma;
    };
    long double top = term(1.0L);
    std::vector<long double> terms;
    for (long double m = 1.0L;; m += 1.0L) {
        const long double t = term(m);
        terms.push_back(t);
        top = std::max(top, t);
        if (m > 20.0L && t < top - 60.0L) break;
        if (m > 200000.0L) break;
    }
    long double s = 0.0L;
    for (long double t : terms) s += std::exp(t - top);
    return top + std::log(s);
}

// Maximizer of a unimodal f on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline double integrate(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

// Single 61-point panel, exact for polynomials of low degree on [a,b].
inline double integrate_panel(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 0, 0.0);
}

// Central differences of f at x.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd p = x, m = x;
        p(i) += h;
        m(i) -= h;
        g(i) = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
}

}  // namespace oracle
