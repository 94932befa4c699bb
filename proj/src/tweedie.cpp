#include "twsbm/tweedie.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "twsbm/errors.hpp"
#include "twsbm/numeric.hpp"

namespace twsbm {

namespace {

void require_power(double rho) {
    if (!(rho > 1.0 && rho < 2.0))
        throw ConfigError("Tweedie power must lie in (1,2), got " + std::to_string(rho));
}

// log sum_{j>=1} exp(j*slope - constant(j)), summed outward from the term
// nearest `peak_hint` until terms fall kSeriesDrop below the running maximum.
// j -> j*slope - constant(j) is concave, so the walk visits a unimodal sequence.
// Also returns the mean and variance of j under the normalized weights.
struct SeriesValue {
    double log_sum;
    double mean_j;
    double var_j;
};

template <class Constant>
SeriesValue log_sum_series(double slope, double peak_hint, Constant&& constant) {
    if (!(peak_hint < static_cast<double>(kMaxSeriesTerms)))
        throw NumericalError("Tweedie series peak beyond term cap (j* = " +
                             std::to_string(peak_hint) + ")");
    const std::int64_t start = std::max<std::int64_t>(1, std::llround(peak_hint));
    const double j0 = static_cast<double>(start);

    double top = j0 * slope - constant(start);
    // sums of exp(term - top) * (j - j0)^m, m = 0,1,2
    double s0 = 1.0, s1 = 0.0, s2 = 0.0;
    std::int64_t terms = 1;

    auto add = [&](std::int64_t j, double t) {
        const double d = static_cast<double>(j) - j0;
        double w;
        if (t > top) {
            const double scale = std::exp(top - t);
            s0 *= scale;
            s1 *= scale;
            s2 *= scale;
            top = t;
            w = 1.0;
        } else {
            w = std::exp(t - top);
        }
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        if (++terms > kMaxSeriesTerms)
            throw NumericalError("Tweedie series exceeded the term cap");
    };

    for (std::int64_t j = start + 1;; ++j) {
        const double t = static_cast<double>(j) * slope - constant(j);
        add(j, t);
        if (t < top - kSeriesDrop) break;
    }
    for (std::int64_t j = start - 1; j >= 1; --j) {
        const double t = static_cast<double>(j) * slope - constant(j);
        add(j, t);
        if (t < top - kSeriesDrop) break;
    }
    const double m1 = s1 / s0;
    return {top + std::log(s0), j0 + m1, std::max(0.0, s2 / s0 - m1 * m1)};
}

}  // namespace

TweedieParams::TweedieParams(double mu, double phi, double rho) : mu_(mu), phi_(phi), rho_(rho) {
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw ConfigError("Tweedie mean must be positive and finite");
    if (!(phi > 0.0) || !std::isfinite(phi))
        throw ConfigError("Tweedie dispersion must be positive and finite");
    require_power(rho);
}

double TweedieParams::variance() const noexcept { return phi_ * std::pow(mu_, rho_); }

CompoundParams::CompoundParams(double lambda, double alpha, double gamma)
    : lambda_(lambda), alpha_(alpha), gamma_(gamma) {
    if (!(lambda > 0.0) || !(alpha > 0.0) || !(gamma > 0.0) || !std::isfinite(lambda) ||
        !std::isfinite(alpha) || !std::isfinite(gamma))
        throw ConfigError("compound Poisson-Gamma parameters must be positive and finite");
}

CompoundParams to_compound(const TweedieParams& p) {
    const double rho = p.rho();
    const double lambda = std::pow(p.mu(), 2.0 - rho) / (p.phi() * (2.0 - rho));
    const double alpha = (2.0 - rho) / (rho - 1.0);
    const double gamma = p.phi() * (rho - 1.0) * std::pow(p.mu(), rho - 1.0);
    return {lambda, alpha, gamma};
}

TweedieParams from_compound(const CompoundParams& c) {
    const double rho = (c.alpha() + 2.0) / (c.alpha() + 1.0);
    const double mu = c.lambda() * c.alpha() * c.gamma();
    const double phi = c.gamma() / ((rho - 1.0) * std::pow(mu, rho - 1.0));
    return {mu, phi, rho};
}

double log_series(double y, double phi, double rho) {
    if (y < 0.0) throw std::domain_error("Tweedie response must be non-negative");
    if (y == 0.0) return 0.0;
    require_power(rho);
    const double alpha = (2.0 - rho) / (rho - 1.0);
    const double log_y = std::log(y);
    const double slope = alpha * log_y - alpha * std::log(rho - 1.0) -
                         (1.0 + alpha) * std::log(phi) - std::log(2.0 - rho);
    const double peak = std::pow(y, 2.0 - rho) / (phi * (2.0 - rho));
    const SeriesValue v = log_sum_series(slope, peak, [alpha](std::int64_t j) {
        const double jd = static_cast<double>(j);
        return log_gamma(jd + 1.0) + log_gamma(jd * alpha);
    });
    return v.log_sum - log_y;
}

double log_density_kernel(double y, double mu, double phi, double rho) {
    return (y * std::pow(mu, 1.0 - rho) / (1.0 - rho) - std::pow(mu, 2.0 - rho) / (2.0 - rho)) /
           phi;
}

double log_density(double y, const TweedieParams& p) {
    if (y < 0.0 || std::isnan(y)) throw std::domain_error("Tweedie response must be non-negative");
    return log_series(y, p.phi(), p.rho()) + log_density_kernel(y, p.mu(), p.phi(), p.rho());
}

double sample(const TweedieParams& params, Rng& rng) {
    const CompoundParams c = to_compound(params);
    std::poisson_distribution<long long> count(c.lambda());
    const long long n = count(rng);
    if (n == 0) return 0.0;
    std::gamma_distribution<double> total(static_cast<double>(n) * c.alpha(), c.gamma());
    return total(rng);
}

SeriesSum::SeriesSum(double rho, std::vector<double> positive_y)
    : rho_(rho), alpha_((2.0 - rho) / (rho - 1.0)) {
    require_power(rho);
    log_y_.reserve(positive_y.size());
    y_pow_.reserve(positive_y.size());
    for (double y : positive_y) {
        if (!(y > 0.0)) throw std::domain_error("SeriesSum expects strictly positive responses");
        log_y_.push_back(std::log(y));
        y_pow_.push_back(std::pow(y, 2.0 - rho));
    }
    table_.push_back(0.0);  // j = 0 is never used
}

double SeriesSum::log_term_constant(std::int64_t j) {
    while (static_cast<std::int64_t>(table_.size()) <= j) {
        const double jd = static_cast<double>(table_.size());
        table_.push_back(log_gamma(jd + 1.0) + log_gamma(jd * alpha_));
    }
    return table_[static_cast<std::size_t>(j)];
}

double SeriesSum::operator()(double phi) { return moments(phi).value; }

SeriesMoments SeriesSum::moments(double phi) {
    const double base = -alpha_ * std::log(rho_ - 1.0) - (1.0 + alpha_) * std::log(phi) -
                        std::log(2.0 - rho_);
    const double peak_scale = 1.0 / (phi * (2.0 - rho_));
    auto constant = [this](std::int64_t j) { return log_term_constant(j); };
    // d(term_j)/d(log phi) = -(1 + alpha) j
    const double c = 1.0 + alpha_;
    SeriesMoments out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < log_y_.size(); ++i) {
        const double slope = alpha_ * log_y_[i] + base;
        const SeriesValue v = log_sum_series(slope, y_pow_[i] * peak_scale, constant);
        out.value += v.log_sum - log_y_[i];
        out.d1 -= c * v.mean_j;
        out.d2 += c * c * v.var_j;
    }
    return out;
}

}  // namespace twsbm
