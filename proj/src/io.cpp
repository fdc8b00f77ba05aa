#include "qknn/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qknn/error.hpp"

namespace qknn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(std::istream& in, const std::string& source) {
  Table table;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cells = split(view);
    if (!have_header) {
      for (auto cell : cells) table.header.emplace_back(cell);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                       " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_number(cells[c]);
      if (!value || !std::isfinite(*value)) {
        throw InputError(source + ":" + std::to_string(line_no) + ": non-numeric cell '" + std::string(cells[c]) +
                         "' in column " + std::to_string(c + 1));
      }
      row.push_back(*value);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError(source + ": missing header row");
  if (table.rows.empty()) throw InputError(source + ": empty dataset (header only)");
  return table;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open file");
  return in;
}

}  // namespace

std::string format_number(double value, int significant) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, significant);
  return std::string(buf.data(), res.ptr);
}

std::string format_exact(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

LoadedData load_csv(std::istream& in, const std::string& source) {
  const Table table = read_table(in, source);
  const std::size_t cols = table.header.size();
  const bool has_truth = cols >= 3 && table.header.back() == "theta_star";
  const std::size_t y_col = has_truth ? cols - 2 : cols - 1;
  if (y_col < 1) throw InputError(source + ": need at least one covariate column and a response column");

  LoadedData out;
  out.columns = table.header;
  const auto n = static_cast<Index>(table.rows.size());
  out.data.X.resize(n, static_cast<Index>(y_col));
  out.data.y.resize(n);
  if (has_truth) out.theta_star = Vector(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < y_col; ++c) out.data.X(i, static_cast<Index>(c)) = row[c];
    out.data.y[i] = row[y_col];
    if (has_truth) (*out.theta_star)[i] = row[cols - 1];
  }
  return out;
}

LoadedData load_csv(const std::string& path) {
  std::ifstream in = open(path);
  return load_csv(in, path);
}

Matrix load_matrix_csv(const std::string& path, std::vector<std::string>* columns) {
  std::ifstream in = open(path);
  const Table table = read_table(in, path);
  Matrix out(static_cast<Index>(table.rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) = table.rows[r][c];
    }
  }
  if (columns != nullptr) *columns = table.header;
  return out;
}

void write_scenario_csv(std::ostream& out, const ScenarioSample& sample) {
  out << "# scenario=" << sample.scenario << " tau=" << format_exact(sample.tau) << " error=" << sample.error.name()
      << " seed=" << sample.seed << " normalization=" << format_exact(sample.normalization) << '\n';
  for (Index c = 0; c < sample.X.cols(); ++c) out << 'x' << (c + 1) << ',';
  out << "y,theta_star\n";
  for (Index i = 0; i < sample.X.rows(); ++i) {
    for (Index c = 0; c < sample.X.cols(); ++c) out << format_exact(sample.X(i, c)) << ',';
    out << format_exact(sample.y[i]) << ',' << format_exact(sample.theta_star[i]) << '\n';
  }
}

void write_vector_csv(std::ostream& out, std::string_view column, const Vector& values) {
  out << column << '\n';
  for (Index i = 0; i < values.size(); ++i) out << format_exact(values[i]) << '\n';
}

}  // namespace qknn
