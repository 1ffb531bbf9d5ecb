#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "qreg/core.hpp"
#include "qreg/problems/operators.hpp"

namespace qreg {

struct LibsvmData {
  SparseMatrix A;
  Vector b;
};

namespace detail {

inline double parse_number(const std::string& tok, std::size_t line, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("malformed ") + what + " '" + tok + "'");
  }
}

}  // namespace detail

/// LIBSVM text format: "label idx:val idx:val ..." with 1-based, strictly
/// increasing indices. Labels 0/1 are mapped to -1/+1.
inline LibsvmData parse_libsvm(std::istream& in) {
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> labels;
  Index n = 0;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    std::istringstream ls(text);
    std::string tok;
    if (!(ls >> tok)) continue;
    const double raw = detail::parse_number(tok, line_no, "label");
    double label;
    if (raw == 1.0) {
      label = 1.0;
    } else if (raw == -1.0 || raw == 0.0) {
      label = -1.0;
    } else {
      throw ParseError(line_no, "label '" + tok + "' is not binary");
    }
    const Index row = static_cast<Index>(labels.size());
    labels.push_back(label);
    long long last = 0;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError(line_no, "malformed feature '" + tok + "'");
      }
      long long idx = 0;
      try {
        std::size_t pos = 0;
        idx = std::stoll(tok.substr(0, colon), &pos);
        if (pos != colon) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(line_no, "malformed index in '" + tok + "'");
      }
      if (idx < 1) throw ParseError(line_no, "index must be 1-based in '" + tok + "'");
      if (idx <= last) throw ParseError(line_no, "indices not increasing at '" + tok + "'");
      last = idx;
      const double v = detail::parse_number(tok.substr(colon + 1), line_no, "value");
      entries.emplace_back(row, static_cast<Index>(idx - 1), v);
      n = std::max<Index>(n, static_cast<Index>(idx));
    }
  }
  if (labels.empty()) throw ParseError(line_no, "no samples in LIBSVM input");
  LibsvmData d;
  d.A.resize(static_cast<Index>(labels.size()), std::max<Index>(n, 1));
  d.A.setFromTriplets(entries.begin(), entries.end());
  d.A.makeCompressed();
  d.b = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
  return d;
}

inline LibsvmData load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open LIBSVM file: " + path);
  try {
    return parse_libsvm(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

/// Inverse of parse_libsvm for +-1 labels; zeros are not written.
inline void write_libsvm(std::ostream& out, const Matrix& A, const Vector& b) {
  char buf[64];
  for (Index i = 0; i < A.rows(); ++i) {
    out << (b[i] > 0.0 ? "+1" : "-1");
    for (Index j = 0; j < A.cols(); ++j) {
      if (A(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof buf, " %lld:%.17g", static_cast<long long>(j + 1), A(i, j));
      out << buf;
    }
    out << "\n";
  }
}

struct ReturnsTable {
  std::vector<std::string> tickers;
  Matrix returns;  // assets x periods
};

/// CSV with a header row of tickers and one row per period. With
/// `log_returns`, rows hold prices R and the output is
/// xi_{i,t} = 100 (log R_{i,t+1} - log R_{i,t}); otherwise rows hold returns.
inline ReturnsTable parse_returns_csv(std::istream& in, bool log_returns) {
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    return out;
  };
  std::string text;
  std::size_t line_no = 1;
  if (!std::getline(in, text)) throw ParseError(1, "empty returns CSV");
  ReturnsTable t;
  t.tickers = split(text);
  const Index n = static_cast<Index>(t.tickers.size());
  if (n < 1) throw ParseError(1, "no tickers in header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(text);
    if (static_cast<Index>(cells.size()) != n) {
      throw ParseError(line_no, "expected " + std::to_string(n) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      const double v = detail::parse_number(c, line_no, "value");
      if (log_returns && !(v > 0.0)) throw ParseError(line_no, "price must be positive");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const Index periods = static_cast<Index>(rows.size()) - (log_returns ? 1 : 0);
  if (periods < 2) throw ParseError(line_no, "too few periods");
  t.returns.resize(n, periods);
  for (Index p = 0; p < periods; ++p)
    for (Index i = 0; i < n; ++i) {
      t.returns(i, p) = log_returns ? 100.0 * (std::log(rows[p + 1][i]) - std::log(rows[p][i]))
                                    : rows[p][i];
    }
  return t;
}

inline ReturnsTable load_returns_csv(const std::string& path, bool log_returns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open returns CSV: " + path);
  return parse_returns_csv(in, log_returns);
}

}  // namespace qreg
