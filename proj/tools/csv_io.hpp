#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sofari::cli {

// Malformed input; the message carries file and line.
struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rows are observations, comma-separated, '.' decimal, optional single header row;
// blank lines and lines starting with '#' are ignored.
Eigen::MatrixXd read_csv(const std::string& path, bool header);
void write_csv(const std::string& path, const Eigen::MatrixXd& m, const std::string& comment = "");

}  // namespace sofari::cli
