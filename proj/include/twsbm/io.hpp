#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "twsbm/network.hpp"

namespace twsbm::io {

/// Shortest text that round-trips: %.17g.
std::string format_double(double value);

/// Plain numeric CSV, no header. Throws DataError naming the offending
/// row/column (1-based) on parse failure, NaN, or ragged rows.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

struct ManifestEntry {
    double time;
    std::filesystem::path path;
};

/// "time,path" rows (header optional); relative paths resolve against the
/// manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

/// Reads every network matrix listed in the manifest and every covariate
/// file, symmetrizes the networks, and checks that all share n.
NetworkData load_csv(const std::filesystem::path& manifest,
                     const std::vector<std::filesystem::path>& covariates,
                     bool symmetrize = true);

/// "node,label" with 1-based node and label.
CommunityLabels read_labels(const std::filesystem::path& path, int communities = 0);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// Table with a header row; every other cell numeric.
struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};
Table read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const Eigen::MatrixXd& values);

}  // namespace twsbm::io
