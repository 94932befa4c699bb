#include "twsbm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "twsbm/errors.hpp"

namespace twsbm::io {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            if (!parse_number(cells[c], v))
                throw DataError(path.string() + ": bad entry '" + trim(cells[c]) + "' at row " +
                                std::to_string(rows.size() + 1) + ", column " + std::to_string(c + 1));
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(path.string() + ": row " + std::to_string(rows.size() + 1) + " has " +
                            std::to_string(row.size()) + " columns, expected " +
                            std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": empty matrix file");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
    auto out = open_out(path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
    auto in = open_in(manifest);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 2)
            throw DataError(manifest.string() + ": line " + std::to_string(lineno) + " needs time,path");
        double t = 0.0;
        if (!parse_number(cells[0], t)) {
            if (out.empty() && lineno == 1) continue;  // header
            throw DataError(manifest.string() + ": bad time on line " + std::to_string(lineno));
        }
        fs::path p = trim(cells[1]);
        if (p.is_relative()) p = manifest.parent_path() / p;
        out.push_back({t, p});
    }
    if (out.empty()) throw DataError(manifest.string() + ": manifest lists no time points");
    return out;
}

NetworkData load_csv(const fs::path& manifest, const std::vector<fs::path>& covariates, bool symmetrize) {
    const auto entries = read_manifest(manifest);
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> raw;
    for (const auto& e : entries) {
        times.push_back(e.time);
        raw.push_back(read_matrix(e.path));
    }
    TimeGrid grid(std::move(times));
    DynamicNetwork net = symmetrize ? validate_and_symmetrize(grid, raw) : DynamicNetwork(grid, raw);

    std::vector<Eigen::MatrixXd> xs;
    for (const auto& p : covariates) {
        Eigen::MatrixXd x = read_matrix(p);
        if (x.rows() != net.nodes() || x.cols() != net.nodes())
            throw DataError(p.string() + ": covariate is " + std::to_string(x.rows()) + " x " +
                            std::to_string(x.cols()) + " but the network has " + std::to_string(net.nodes()) +
                            " nodes");
        xs.push_back(std::move(x));
    }
    NetworkData data{std::move(net), CovariateSet(static_cast<int>(xs.empty() ? 0 : xs.front().rows()), xs)};
    data.validate();
    return data;
}

CommunityLabels read_labels(const fs::path& path, int communities) {
    const Table t = read_table(path);
    if (t.values.cols() != 2) throw DataError(path.string() + ": labels file needs node,label columns");
    const auto n = t.values.rows();
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    int top = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const double node = t.values(r, 0);
        const double lab = t.values(r, 1);
        if (node != std::floor(node) || node < 1 || node > static_cast<double>(n) || lab != std::floor(lab) || lab < 1)
            throw DataError(path.string() + ": invalid node/label on row " + std::to_string(r + 2));
        auto& slot = labels[static_cast<std::size_t>(node) - 1];
        if (slot >= 0) throw DataError(path.string() + ": node " + std::to_string(static_cast<int>(node)) + " repeated");
        slot = static_cast<int>(lab) - 1;
        top = std::max(top, slot + 1);
    }
    if (communities > 0 && top > communities) throw DataError(path.string() + ": label exceeds K");
    return CommunityLabels(std::move(labels), communities > 0 ? communities : top);
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
    auto out = open_out(path);
    out << "node,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i + 1 << ',' << labels[i] + 1 << '\n';
}

Table read_table(const fs::path& path) {
    auto in = open_in(path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty table");
    for (const auto& h : split(line)) t.header.push_back(trim(h));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw DataError(path.string() + ": row " + std::to_string(rows.size() + 2) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(t.header.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (!parse_number(cells[c], row[c]))
                throw DataError(path.string() + ": bad entry at row " + std::to_string(rows.size() + 2) +
                                ", column " + std::to_string(c + 1));
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (Eigen::Index i = 0; i < t.values.rows(); ++i)
        for (Eigen::Index j = 0; j < t.values.cols(); ++j)
            t.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return t;
}

void write_table(const fs::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
        out << '\n';
    }
}

}  // namespace twsbm::io
