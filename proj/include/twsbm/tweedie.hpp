#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace twsbm {

using Rng = std::mt19937_64;

/// Mean/dispersion/power parameterization of the restricted Tweedie law,
/// 1 < rho < 2. var(Y) = phi * mu^rho.
class TweedieParams {
public:
    TweedieParams(double mu, double phi, double rho);

    double mu() const noexcept { return mu_; }
    double phi() const noexcept { return phi_; }
    double rho() const noexcept { return rho_; }
    double variance() const noexcept;

private:
    double mu_;
    double phi_;
    double rho_;
};

/// Poisson rate / Gamma shape / Gamma scale of the equivalent compound
/// Poisson-Gamma law.
class CompoundParams {
public:
    CompoundParams(double lambda, double alpha, double gamma);

    double lambda() const noexcept { return lambda_; }
    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }

private:
    double lambda_;
    double alpha_;
    double gamma_;
};

CompoundParams to_compound(const TweedieParams& params);
TweedieParams from_compound(const CompoundParams& params);

/// Hard cap on series terms; exceeding it throws NumericalError.
inline constexpr std::int64_t kMaxSeriesTerms = 1'000'000;

/// Terms below peak - kSeriesDrop (natural log) are dropped.
inline constexpr double kSeriesDrop = 37.0;

/// log a(y, phi, rho) for y > 0, where a is the normalizing series of the
/// Tweedie density. Returns 0 for y == 0.
double log_series(double y, double phi, double rho);

/// log f(y | mu, phi, rho). Throws std::domain_error for y < 0.
double log_density(double y, const TweedieParams& params);

/// Deviance-like exponent (1/phi)(y mu^(1-rho)/(1-rho) - mu^(2-rho)/(2-rho)).
double log_density_kernel(double y, double mu, double phi, double rho);

/// One draw: N ~ Poisson(lambda); Y = 0 if N == 0, else Gamma(N alpha, gamma).
double sample(const TweedieParams& params, Rng& rng);

/// Value and first two derivatives with respect to log(phi).
struct SeriesMoments {
    double value;
    double d1;
    double d2;
};

/// Evaluates sum_y log a(y, phi, rho) for a fixed set of positive responses
/// and a fixed power, at many dispersion values. The log-gamma part of each
/// series term depends only on (j, rho) and is tabulated once.
///
/// Not thread-safe: the table grows on demand. Use one instance per thread.
class SeriesSum {
public:
    SeriesSum(double rho, std::vector<double> positive_y);

    double rho() const noexcept { return rho_; }
    std::size_t size() const noexcept { return log_y_.size(); }

    /// sum over stored y of log a(y, phi, rho).
    double operator()(double phi);

    /// The sum and its first two derivatives in log(phi), from one pass.
    SeriesMoments moments(double phi);

private:
    double log_term_constant(std::int64_t j);

    double rho_;
    double alpha_;
    std::vector<double> log_y_;
    std::vector<double> y_pow_;   // y^(2-rho)
    std::vector<double> table_;   // lgamma(j+1) + lgamma(j alpha), index j
};

}  // namespace twsbm
