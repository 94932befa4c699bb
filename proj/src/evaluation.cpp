#include "twsbm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "twsbm/errors.hpp"

namespace twsbm {

namespace {

// maps the distinct label values, in increasing order, to 0..m-1
std::vector<int> compact(const std::vector<int>& v, int& count) {
    std::map<int, int> ids;
    for (int x : v) ids.emplace(x, 0);
    int next = 0;
    for (auto& [value, id] : ids) id = next++;
    std::vector<int> out;
    out.reserve(v.size());
    for (int x : v) out.push_back(ids[x]);
    count = next;
    return out;
}

double entropy(const Eigen::VectorXd& counts, double n) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < counts.size(); ++i)
        if (counts(i) > 0.0) h -= counts(i) / n * std::log(counts(i) / n);
    return h;
}

}  // namespace

ClusteringScore nmi(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DataError("label vectors differ in length");
    if (a.empty()) throw DataError("cannot score empty labelings");
    int ka = 0, kb = 0;
    const auto ca = compact(a, ka);
    const auto cb = compact(b, kb);
    ClusteringScore s;
    s.contingency = Eigen::MatrixXi::Zero(ka, kb);
    for (std::size_t i = 0; i < ca.size(); ++i) ++s.contingency(ca[i], cb[i]);

    if (ka == 1 || kb == 1) {
        s.nmi = ka == kb ? 1.0 : 0.0;
        return s;
    }
    const double n = static_cast<double>(a.size());
    const Eigen::MatrixXd c = s.contingency.cast<double>();
    const Eigen::VectorXd ra = c.rowwise().sum();
    const Eigen::VectorXd rb = c.colwise().sum().transpose();
    double mi = 0.0;
    for (int i = 0; i < ka; ++i)
        for (int j = 0; j < kb; ++j)
            if (c(i, j) > 0.0) mi += c(i, j) / n * std::log(c(i, j) * n / (ra(i) * rb(j)));
    s.nmi = std::clamp(2.0 * mi / (entropy(ra, n) + entropy(rb, n)), 0.0, 1.0);
    return s;
}

ClusteringScore nmi(const CommunityLabels& a, const CommunityLabels& b) { return nmi(a.values(), b.values()); }

Eigen::VectorXd err_beta(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
    if (est.rows() != truth.rows() || est.cols() != truth.cols())
        throw DataError("estimated coefficient grid is " + std::to_string(est.rows()) + " x " +
                        std::to_string(est.cols()) + ", truth is " + std::to_string(truth.rows()) + " x " +
                        std::to_string(truth.cols()));
    if (est.rows() == 0) throw DataError("empty coefficient grid");
    return (est - truth).array().square().colwise().mean().transpose();
}

ParameterSummary summarize(const std::vector<double>& estimates, double truth) {
    ParameterSummary s;
    s.runs = static_cast<int>(estimates.size());
    if (s.runs == 0) return s;
    double sum = 0.0;
    for (double e : estimates) sum += e;
    s.mean = sum / s.runs;
    s.bias = s.mean - truth;
    if (s.runs > 1) {
        double ss = 0.0;
        for (double e : estimates) ss += (e - s.mean) * (e - s.mean);
        s.se = std::sqrt(ss / (s.runs - 1));
    }
    return s;
}

ParameterReport parameter_report(const std::vector<RunRecord>& runs, double phi_true, double rho_true) {
    ParameterReport r;
    std::vector<double> phi, rho, score;
    for (const auto& run : runs) {
        phi.push_back(run.phi_hat);
        rho.push_back(run.rho_hat);
        score.push_back(run.nmi);
    }
    r.phi = summarize(phi, phi_true);
    r.rho = summarize(rho, rho_true);
    r.nmi = summarize(score, 1.0);
    const auto p = runs.empty() ? 0 : runs.front().err.size();
    for (Eigen::Index u = 0; u < p; ++u) {
        std::vector<double> e;
        for (const auto& run : runs) {
            if (run.err.size() != p) throw DataError("runs disagree on the number of covariates");
            e.push_back(run.err(u));
        }
        r.err.push_back(summarize(e, 0.0));
    }
    return r;
}

}  // namespace twsbm
