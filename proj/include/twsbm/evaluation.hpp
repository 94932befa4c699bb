#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "twsbm/network.hpp"

namespace twsbm {

struct ClusteringScore {
    double nmi = 0.0;
    Eigen::MatrixXi contingency;  // rows: distinct labels of a in increasing order, columns: same for b
};

/// 2 I(a;b) / (H(a) + H(b)), natural log, 0 log 0 = 0. When either side is a
/// single cluster the value is 1 if both are, else 0.
ClusteringScore nmi(const std::vector<int>& a, const std::vector<int>& b);
ClusteringScore nmi(const CommunityLabels& a, const CommunityLabels& b);

/// Column-wise mean over time of (est - truth)^2.
Eigen::VectorXd err_beta(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth);

/// Bias and SE (n-1 denominator) of repeated estimates of one parameter.
struct ParameterSummary {
    int runs = 0;
    double mean = 0.0;
    double bias = 0.0;
    std::optional<double> se;  // absent for a single run
};

ParameterSummary summarize(const std::vector<double>& estimates, double truth);

/// One simulation run: what was estimated and what was true.
struct RunRecord {
    double phi_hat = 0.0;
    double rho_hat = 0.0;
    double nmi = 0.0;
    Eigen::VectorXd err;  // per covariate, empty without covariates
};

struct ParameterReport {
    ParameterSummary phi;
    ParameterSummary rho;
    ParameterSummary nmi;  // truth 1
    std::vector<ParameterSummary> err;  // per covariate, truth 0
};

ParameterReport parameter_report(const std::vector<RunRecord>& runs, double phi_true, double rho_true);

}  // namespace twsbm
