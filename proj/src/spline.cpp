#include "twsbm/spline.hpp"

#include <algorithm>
#include <cmath>

#include "twsbm/errors.hpp"

namespace twsbm {

SplineBasis SplineBasis::build(const TimeGrid& grid) {
    const int T = grid.size();
    if (T < 4) throw ConfigError("a cubic spline basis needs at least 4 time points, got " + std::to_string(T));
    std::vector<double> knots;
    knots.reserve(static_cast<std::size_t>(T) + 8);
    for (int r = 0; r < 4; ++r) knots.push_back(grid[0]);
    knots.push_back(0.5 * (grid[0] + grid[1]));
    for (int v = 1; v < T - 1; ++v) knots.push_back(grid[v]);
    knots.push_back(0.5 * (grid[T - 2] + grid[T - 1]));
    for (int r = 0; r < 4; ++r) knots.push_back(grid[T - 1]);
    return SplineBasis(grid, std::move(knots));
}

SplineBasis::SplineBasis(TimeGrid grid, std::vector<double> knots)
    : grid_(std::move(grid)), knots_(std::move(knots)) {
    const int q = size();
    const int T = grid_.size();
    B_ = Eigen::MatrixXd::Zero(T, q);
    for (int v = 0; v < T; ++v) B_.row(v) = row(grid_[v]);

    // B'' is linear on each knot interval, so Simpson's rule is exact there.
    omega_ = Eigen::MatrixXd::Zero(q, q);
    for (int i = kDegree; i < q; ++i) {
        const double a = knots_[static_cast<std::size_t>(i)];
        const double b = knots_[static_cast<std::size_t>(i) + 1];
        if (!(b > a)) continue;
        const double xs[3] = {a, 0.5 * (a + b), b};
        const double ws[3] = {(b - a) / 6.0, 4.0 * (b - a) / 6.0, (b - a) / 6.0};
        for (int s = 0; s < 3; ++s) {
            double d[3][4];
            derivatives(i, xs[s], d);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) omega_(i - kDegree + r, i - kDegree + c) += ws[s] * d[2][r] * d[2][c];
        }
    }
    omega_ = 0.5 * (omega_ + omega_.transpose()).eval();
}

int SplineBasis::span(double t) const {
    const int q = size();
    if (t >= knots_[static_cast<std::size_t>(q)]) return q - 1;
    const auto it = std::upper_bound(knots_.begin() + kDegree, knots_.begin() + q + 1, t);
    return static_cast<int>(it - knots_.begin()) - 1;
}

void SplineBasis::derivatives(int i, double t, double out[3][4]) const {
    const auto& U = knots_;
    const auto k = [&](int idx) { return U[static_cast<std::size_t>(idx)]; };
    double ndu[4][4];
    double left[4], right[4];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= kDegree; ++j) {
        left[j] = t - k(i + 1 - j);
        right[j] = k(i + j) - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for (int j = 0; j <= kDegree; ++j) out[0][j] = ndu[j][kDegree];

    double a[2][4];
    for (int r = 0; r <= kDegree; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int kk = 1; kk <= 2; ++kk) {
            double d = 0.0;
            const int rk = r - kk, pk = kDegree - kk;
            if (r >= kk) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? kk - 1 : kDegree - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][kk] = -a[s1][kk - 1] / ndu[pk + 1][r];
                d += a[s2][kk] * ndu[r][pk];
            }
            out[kk][r] = d;
            std::swap(s1, s2);
        }
    }
    double f = kDegree;
    for (int kk = 1; kk <= 2; ++kk) {
        for (int j = 0; j <= kDegree; ++j) out[kk][j] *= f;
        f *= kDegree - kk;
    }
}

Eigen::RowVectorXd SplineBasis::row(double t, int derivative) const {
    const double lo = grid_[0], hi = grid_[grid_.size() - 1];
    if (!(t >= lo && t <= hi))
        throw ConfigError("spline evaluated outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (derivative < 0 || derivative > 2) throw ConfigError("only derivatives 0..2 are available");
    const int i = span(t);
    double d[3][4];
    derivatives(i, t, d);
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(size());
    for (int r = 0; r < 4; ++r) out(i - kDegree + r) = d[derivative][r];
    return out;
}

Eigen::VectorXd SplineBasis::greville() const {
    Eigen::VectorXd g(size());
    for (int m = 0; m < size(); ++m)
        g(m) = (knots_[static_cast<std::size_t>(m) + 1] + knots_[static_cast<std::size_t>(m) + 2] +
                knots_[static_cast<std::size_t>(m) + 3]) / 3.0;
    return g;
}

Eigen::MatrixXd SplineBasis::evaluate(const Eigen::MatrixXd& eta) const {
    if (eta.rows() != size())
        throw ConfigError("coefficient matrix has " + std::to_string(eta.rows()) + " rows, basis has " +
                          std::to_string(size()));
    return B_ * eta;
}

Eigen::VectorXd SplineBasis::at(double t, const Eigen::MatrixXd& eta) const {
    if (eta.rows() != size()) throw ConfigError("coefficient matrix does not match the basis");
    return (row(t) * eta).transpose();
}

double SplineBasis::penalty_value(const Eigen::MatrixXd& eta, const Eigen::VectorXd& lambda) const {
    if (eta.rows() != size() || lambda.size() != eta.cols())
        throw ConfigError("penalty dimensions do not conform");
    double total = 0.0;
    for (Eigen::Index u = 0; u < eta.cols(); ++u) {
        if (lambda(u) < 0.0) throw ConfigError("penalty weights must be non-negative");
        total += lambda(u) * eta.col(u).dot(omega_ * eta.col(u));
    }
    return 0.5 * total;
}

}  // namespace twsbm
