#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qknn/graph.hpp"
#include "qknn/simulate.hpp"
#include "qknn/types.hpp"

namespace qknn {

// Six significant digits, dot decimal separator, independent of locale.
std::string format_number(double value, int significant = 6);
// Shortest representation that parses back to the identical double.
std::string format_exact(double value);

// Strict, locale-independent parse of a whole cell (surrounding blanks allowed).
std::optional<double> parse_number(std::string_view text);

struct LoadedData {
  Dataset data;
  std::vector<std::string> columns;
  // Present when the file carries a trailing theta_star column (scenario files).
  std::optional<Vector> theta_star;
};

// Reads a headed CSV. Lines starting with '#' are comments. The last column
// is the response and the others are covariates, except that a trailing
// `theta_star` column is split off and the column before it is the response.
LoadedData load_csv(const std::string& path);
LoadedData load_csv(std::istream& in, const std::string& source = "<stream>");

// Headed numeric table with every column kept (prediction queries).
Matrix load_matrix_csv(const std::string& path, std::vector<std::string>* columns = nullptr);

// x1..xd,y,theta_star with a leading metadata comment; values written exactly.
void write_scenario_csv(std::ostream& out, const ScenarioSample& sample);

// Single-column CSV, values written exactly.
void write_vector_csv(std::ostream& out, std::string_view column, const Vector& values);

}  // namespace qknn
