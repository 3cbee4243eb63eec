#include "moilab/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "moilab/error.hpp"

namespace moilab {

namespace {

cplx entry_from_json(const nlohmann::json& e, std::size_t i, std::size_t j) {
  auto where = [&] { return " at entry [" + std::to_string(i) + "][" + std::to_string(j) + "]"; };
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
    return {e[0].get<double>(), e[1].get<double>()};
  }
  throw ParseError("matrix JSON: expected a number or [re, im]" + where());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("matrix JSON: expected a nonempty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ParseError("matrix JSON: row 0 is not a nonempty array");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ParseError("matrix JSON: row " + std::to_string(i) + " has a different length");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = entry_from_json(j[i][k], i, k);
    }
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_csv(const std::string& text, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> line_of_row;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = line.find(',', pos);
      std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(source + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
      }
      vals.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(vals));
    line_of_row.push_back(lineno);
  }
  if (rows.empty()) throw ParseError(source + ": no matrix rows");
  const std::size_t d = rows.size();
  for (std::size_t i = 0; i < d; ++i) {
    if (rows[i].size() != 2 * d) {
      throw ParseError(source + ":" + std::to_string(line_of_row[i]) + ": expected " + std::to_string(2 * d) +
                       " values (re,im per column), found " + std::to_string(rows[i].size()));
    }
  }
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cplx(rows[i][2 * k], rows[i][2 * k + 1]);
  return m;
}

std::string matrix_to_csv(const Matrix& m) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (k) os << ',';
      os << m(i, k).real() << ',' << m(i, k).imag();
    }
    os << '\n';
  }
  return os.str();
}

Matrix load_matrix(const std::string& path) {
  const std::string text = read_file(path);
  if (ends_with(path, ".csv")) return matrix_from_csv(text, path);
  if (ends_with(path, ".json")) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
    return matrix_from_json(j);
  }
  throw ParseError(path + ": unknown matrix format (expected .json or .csv)");
}

void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  if (ends_with(path, ".csv")) {
    out << matrix_to_csv(m);
  } else {
    out << matrix_to_json(m).dump() << '\n';
  }
}

}  // namespace moilab
