#include "sparseport/returns.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sparseport/error.hpp"

namespace sparseport {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

ReturnsMatrix make_returns(std::vector<std::string> assets, Eigen::MatrixXd data) {
    if (data.cols() < 1) fail(ErrorKind::Data, "returns matrix has no assets");
    if (static_cast<Eigen::Index>(assets.size()) != data.cols()) {
        fail(ErrorKind::Data, fmt::format("{} asset identifiers for {} columns",
                                          assets.size(), data.cols()));
    }
    if (data.rows() < 2) {
        fail(ErrorKind::InsufficientData,
             fmt::format("need at least 2 periods, got {}", data.rows()));
    }
    if (!data.allFinite()) fail(ErrorKind::Data, "returns matrix contains non-finite entries");
    std::set<std::string> seen;
    for (const auto& id : assets) {
        if (id.empty()) fail(ErrorKind::Data, "empty asset identifier");
        if (!seen.insert(id).second) fail(ErrorKind::Data, "duplicate asset identifier: " + id);
    }
    return ReturnsMatrix{std::move(assets), std::move(data)};
}

Eigen::MatrixXd prices_to_returns(const Eigen::MatrixXd& prices) {
    if (prices.rows() < 2) fail(ErrorKind::InsufficientData, "need at least 2 price rows");
    if ((prices.array() <= 0.0).any() || !prices.allFinite()) {
        fail(ErrorKind::Data, "prices must be finite and strictly positive");
    }
    const Eigen::Index T = prices.rows() - 1;
    return (prices.bottomRows(T).array() - prices.topRows(T).array()) / prices.topRows(T).array();
}

ReturnsMatrix parse_returns_csv(std::istream& in, bool as_prices) {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.empty()) fail(ErrorKind::Data, "returns file is empty");
    const auto n = header.size();

    std::vector<std::vector<double>> rows;
    std::size_t blanks = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != n) {
            fail(ErrorKind::Data, fmt::format("line {}: expected {} cells, got {}", line_no, n,
                                              cells.size()));
        }
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (cells[j].empty()) {
                ++blanks;
                // A blank price repeats the previous one, i.e. a zero return.
                row[j] = as_prices ? (rows.empty() ? std::nan("") : rows.back()[j]) : 0.0;
                continue;
            }
            std::size_t used = 0;
            try {
                row[j] = std::stod(cells[j], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[j].size()) {
                fail(ErrorKind::Data,
                     fmt::format("line {}: cannot parse '{}' as a number", line_no, cells[j]));
            }
        }
        rows.push_back(std::move(row));
    }
    if (blanks > 0) {
        spdlog::warn("{} blank cell(s) in returns file treated as zero return", blanks);
    }

    Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
        }
    }
    if (as_prices) {
        if (!data.allFinite()) fail(ErrorKind::Data, "leading blank price has no prior value");
        data = prices_to_returns(data);
    }
    return make_returns(std::move(header), std::move(data));
}

ReturnsMatrix read_returns_csv(const std::filesystem::path& path, bool as_prices) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Data, "cannot open returns file: " + path.string());
    return parse_returns_csv(in, as_prices);
}

}  // namespace sparseport
