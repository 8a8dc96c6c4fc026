#ifndef PDMPVOL_POLYTOPE_IO_HPP
#define PDMPVOL_POLYTOPE_IO_HPP

#include "pdmpvol/polytope.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmpvol {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Text format: '#' lines and blank lines ignored; header "d k"; then k rows
// "a_1 ... a_d b" meaning a . x <= b.
inline HPolytope read_polytope(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++lineno;
      const auto pos = out.find_first_not_of(" \t\r");
      if (pos == std::string::npos || out[pos] == '#') continue;
      return true;
    }
    return false;
  };
  auto parse_numbers = [&](const std::string& s) {
    std::istringstream ss(s);
    std::vector<double> values;
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ParseError(lineno, "not a number: '" + tok + "'");
      }
      if (used != tok.size()) throw ParseError(lineno, "not a number: '" + tok + "'");
      values.push_back(value);
    }
    return values;
  };

  if (!next_line(line)) throw ParseError(lineno, "missing header 'd k'");
  const auto header = parse_numbers(line);
  if (header.size() != 2 || header[0] < 1 || header[1] < 1 ||
      header[0] != static_cast<double>(static_cast<long long>(header[0])) ||
      header[1] != static_cast<double>(static_cast<long long>(header[1])))
    throw ParseError(lineno, "malformed header, expected 'd k' with positive integers");
  const auto d = static_cast<Index>(header[0]);
  const auto k = static_cast<Index>(header[1]);

  Matrix A(k, d);
  Vector b(k);
  for (Index i = 0; i < k; ++i) {
    if (!next_line(line))
      throw ParseError(lineno, "expected " + std::to_string(k) + " constraint rows, got " +
                                   std::to_string(i));
    const auto row = parse_numbers(line);
    if (static_cast<Index>(row.size()) != d + 1)
      throw ParseError(lineno, "row has " + std::to_string(row.size()) + " numbers, expected " +
                                   std::to_string(d + 1));
    for (Index j = 0; j < d; ++j) A(i, j) = row[static_cast<std::size_t>(j)];
    b[i] = row.back();
    if (!(b[i] > 0.0)) throw ParseError(lineno, "origin not strictly interior (b <= 0)");
    if (A.row(i).squaredNorm() == 0.0) throw ParseError(lineno, "zero row");
  }
  if (next_line(line)) throw ParseError(lineno, "trailing data after constraint rows");
  return HPolytope(std::move(A), std::move(b));
}

inline HPolytope read_polytope(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open polytope file '" + path + "'");
  return read_polytope(in);
}

inline void write_polytope(const HPolytope& P, std::ostream& out) {
  out << P.dim() << ' ' << P.nrows() << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < P.nrows(); ++i) {
    for (Index j = 0; j < P.dim(); ++j) out << P.A()(i, j) << ' ';
    out << P.b()[i] << '\n';
  }
}

inline void write_polytope(const HPolytope& P, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write polytope file '" + path + "'");
  write_polytope(P, out);
}

}  // namespace pdmpvol

#endif  // PDMPVOL_POLYTOPE_IO_HPP
