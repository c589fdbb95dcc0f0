#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sparseport {

/// Per-period simple returns, one column per asset (T x n).
struct ReturnsMatrix {
    std::vector<std::string> assets;
    Eigen::MatrixXd data;

    Eigen::Index periods() const { return data.rows(); }
    Eigen::Index num_assets() const { return data.cols(); }
};

/// Validates and assembles a returns matrix. Throws Data / InsufficientData.
ReturnsMatrix make_returns(std::vector<std::string> assets, Eigen::MatrixXd data);

/// Converts a price matrix to simple returns (P_t - P_{t-1}) / P_{t-1}.
Eigen::MatrixXd prices_to_returns(const Eigen::MatrixXd& prices);

/// Reads comma-separated text: a header of asset identifiers followed by one
/// row per period. Blank cells are read as 0.0 returns (or, with
/// `as_prices`, as an unchanged price) and reported with a warning.
ReturnsMatrix parse_returns_csv(std::istream& in, bool as_prices = false);
ReturnsMatrix read_returns_csv(const std::filesystem::path& path, bool as_prices = false);

}  // namespace sparseport
