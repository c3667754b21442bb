#include "csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <vector>

namespace sofari::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

Eigen::MatrixXd read_csv(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw CsvError(path + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  size_t width = 0;
  bool skip_header = header;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (skip_header) {
      skip_header = false;
      continue;
    }
    std::vector<double> row;
    size_t start = 0;
    for (;;) {
      const size_t end = line.find(',', start);
      const std::string field = trim(line.substr(start, end == std::string::npos ? end : end - start));
      double v = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        throw CsvError(path + ":" + std::to_string(lineno) + ": column " + std::to_string(row.size() + 1) +
                       ": not a number '" + field + "'");
      row.push_back(v);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width)
      throw CsvError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                     " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(path + ": no data rows");
  Eigen::MatrixXd m(rows.size(), width);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv(const std::string& path, const Eigen::MatrixXd& m, const std::string& comment) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error(path + ": cannot write");
  if (!comment.empty()) std::fprintf(f, "# %s\n", comment.c_str());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) std::fprintf(f, "%.17g%c", m(i, j), j + 1 < m.cols() ? ',' : '\n');
  std::fclose(f);
}

}  // namespace sofari::cli
