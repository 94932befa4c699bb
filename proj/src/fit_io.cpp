#include <fstream>
#include <map>
#include <sstream>

#include "twsbm/errors.hpp"
#include "twsbm/fit.hpp"
#include "twsbm/io.hpp"

namespace twsbm {

namespace {

using io::format_double;

void write_row(std::ostream& out, const Eigen::RowVectorXd& row) {
    for (Eigen::Index j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row(j));
    out << '\n';
}

void write_rows(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) write_row(out, m.row(i));
}

std::vector<double> parse_row(const std::string& line, const std::string& where) {
    std::vector<double> v;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw DataError("result file: bad number '" + cell + "' in " + where);
        }
    }
    return v;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, Eigen::Index cols, const std::string& name) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != cols)
            throw DataError("result file: section [" + name + "] row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " values, expected " + std::to_string(cols));
        for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    return m;
}

}  // namespace

void write_result(const std::filesystem::path& path, const FitResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "rho_hat=" << format_double(r.rho_hat) << '\n'
        << "phi_hat=" << format_double(r.phi_hat) << '\n'
        << "loglik=" << format_double(r.loglik) << '\n'
        << "elbo=" << format_double(r.elbo) << '\n'
        << "iterations=" << r.iterations << '\n'
        << "phi_at_boundary=" << (r.phi_at_boundary ? 1 : 0) << '\n'
        << "n=" << r.nodes() << '\n'
        << "K=" << r.communities() << '\n'
        << "p=" << r.covariates() << '\n'
        << "T=" << r.times.size() << '\n'
        << "q=" << r.eta.rows() << '\n';

    out << "\n[beta0]\n";
    write_rows(out, r.beta0);
    out << "\n[pi]\n";
    write_row(out, r.pi.transpose());
    out << "\n[tau]\n";
    write_rows(out, r.tau);
    out << "\n[labels]\nnode,label\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) out << i + 1 << ',' << r.labels[i] + 1 << '\n';
    out << "\n[beta_t]\nt";
    for (int u = 0; u < r.covariates(); ++u) out << ",beta_" << u + 1;
    out << '\n';
    for (std::size_t v = 0; v < r.times.size(); ++v) {
        out << format_double(r.times[v]);
        for (int u = 0; u < r.covariates(); ++u) out << ',' << format_double(r.beta_t(static_cast<Eigen::Index>(v), u));
        out << '\n';
    }
    out << "\n[eta]\n";
    if (r.covariates() > 0) write_rows(out, r.eta);
    out << "\n[rho_diagnostics]\nrho,ok,loglik,elbo,phi,iterations,step1_iterations,best_start,refinements,converged,phi_at_boundary\n";
    for (const auto& d : r.per_rho)
        out << format_double(d.rho) << ',' << (d.ok ? 1 : 0) << ',' << format_double(d.loglik) << ','
            << format_double(d.elbo) << ',' << format_double(d.phi) << ',' << d.iterations << ','
            << d.step1_iterations << ',' << d.best_start + 1 << ',' << d.refinements << ',' << (d.converged ? 1 : 0) << ','
            << (d.phi_at_boundary ? 1 : 0) << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

FitResult read_result(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::map<std::string, std::string> header;
    std::map<std::string, std::vector<std::string>> sections;
    std::string line, current;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            current = line.substr(1, line.size() - 2);
            sections[current];
            continue;
        }
        if (current.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw DataError(path.string() + ": bad header line '" + line + "'");
            header[line.substr(0, eq)] = line.substr(eq + 1);
        } else {
            sections[current].push_back(line);
        }
    }
    auto key = [&](const std::string& k) -> const std::string& {
        const auto it = header.find(k);
        if (it == header.end()) throw DataError(path.string() + ": missing header key '" + k + "'");
        return it->second;
    };
    auto rows = [&](const std::string& name, std::size_t skip = 0) {
        const auto it = sections.find(name);
        if (it == sections.end()) throw DataError(path.string() + ": missing section [" + name + "]");
        std::vector<std::vector<double>> out;
        for (std::size_t i = skip; i < it->second.size(); ++i) out.push_back(parse_row(it->second[i], "[" + name + "]"));
        return out;
    };

    FitResult r;
    try {
        r.rho_hat = std::stod(key("rho_hat"));
        r.phi_hat = std::stod(key("phi_hat"));
        r.loglik = std::stod(key("loglik"));
        r.elbo = std::stod(key("elbo"));
        r.iterations = std::stoi(key("iterations"));
        r.phi_at_boundary = std::stoi(key("phi_at_boundary")) != 0;
    } catch (const std::logic_error&) {
        throw DataError(path.string() + ": malformed header value");
    }
    const int n = std::stoi(key("n")), K = std::stoi(key("K")), p = std::stoi(key("p"));
    const int T = std::stoi(key("T")), q = std::stoi(key("q"));

    r.beta0 = to_matrix(rows("beta0"), K, "beta0");
    const auto pi = to_matrix(rows("pi"), K, "pi");
    if (pi.rows() != 1) throw DataError(path.string() + ": [pi] must be one row");
    r.pi = pi.row(0).transpose();
    r.tau = to_matrix(rows("tau"), K, "tau");
    if (r.tau.rows() != n) throw DataError(path.string() + ": [tau] needs n rows");
    const auto lab = to_matrix(rows("labels", 1), 2, "labels");
    if (lab.rows() != n) throw DataError(path.string() + ": [labels] needs n rows");
    for (Eigen::Index i = 0; i < n; ++i) r.labels.push_back(static_cast<int>(lab(i, 1)) - 1);
    const auto bt = to_matrix(rows("beta_t", 1), p + 1, "beta_t");
    if (bt.rows() != T) throw DataError(path.string() + ": [beta_t] needs T rows");
    for (Eigen::Index v = 0; v < T; ++v) r.times.push_back(bt(v, 0));
    r.beta_t = bt.rightCols(p);
    r.eta = p > 0 ? to_matrix(rows("eta"), p, "eta") : Eigen::MatrixXd(q, 0);
    if (r.eta.rows() != q) throw DataError(path.string() + ": [eta] needs q rows");
    for (const auto& d : rows("rho_diagnostics", 1)) {
        if (d.size() != 11) throw DataError(path.string() + ": bad [rho_diagnostics] row");
        RhoDiagnostics x;
        x.rho = d[0];
        x.ok = d[1] != 0.0;
        x.loglik = d[2];
        x.elbo = d[3];
        x.phi = d[4];
        x.iterations = static_cast<int>(d[5]);
        x.step1_iterations = static_cast<int>(d[6]);
        x.best_start = static_cast<int>(d[7]) - 1;
        x.refinements = static_cast<int>(d[8]);
        x.converged = d[9] != 0.0;
        x.phi_at_boundary = d[10] != 0.0;
        r.per_rho.push_back(x);
    }
    return r;
}

}  // namespace twsbm
