#pragma once

#include <Eigen/Dense>
#include <vector>

#include "twsbm/network.hpp"

namespace twsbm {

/// Clamped cubic B-spline basis on a time grid with T >= 4 points, and the
/// curvature penalty Omega_ij = int B_i''(t) B_j''(t) dt.
///
/// Knots: t_1 (x4), (t_1+t_2)/2, t_2, ..., t_{T-1}, (t_{T-1}+t_T)/2, t_T (x4),
/// giving T+4 basis functions.
class SplineBasis {
public:
    static constexpr int kDegree = 3;

    static SplineBasis build(const TimeGrid& grid);

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    int size() const noexcept { return static_cast<int>(knots_.size()) - kDegree - 1; }

    /// T x (T+4), row nu holds B_m(t_nu).
    const Eigen::MatrixXd& matrix() const noexcept { return B_; }
    const Eigen::MatrixXd& penalty() const noexcept { return omega_; }

    /// Basis values (derivative = 0) or derivatives at t in [t_1, t_T].
    Eigen::RowVectorXd row(double t, int derivative = 0) const;

    /// Greville abscissae; eta_m = a + b*g_m reproduces a + b*t exactly.
    Eigen::VectorXd greville() const;

    /// B * eta, T x p.
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& eta) const;

    /// Spline value at t for every column of eta.
    Eigen::VectorXd at(double t, const Eigen::MatrixXd& eta) const;

    /// (1/2) sum_u lambda_u (eta^T Omega eta)_uu.
    double penalty_value(const Eigen::MatrixXd& eta, const Eigen::VectorXd& lambda) const;

private:
    SplineBasis(TimeGrid grid, std::vector<double> knots);
    int span(double t) const;
    // values[d][r] = d-th derivative of B_{span-3+r} at t, d = 0..2
    void derivatives(int span, double t, double out[3][4]) const;

    TimeGrid grid_;
    std::vector<double> knots_;
    Eigen::MatrixXd B_;
    Eigen::MatrixXd omega_;
};

}  // namespace twsbm
