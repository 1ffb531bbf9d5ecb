#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qreg/core.hpp"

namespace qreg {

using Json = nlohmann::json;

// Non-finite reals are written as null and read back as +inf.

namespace detail {

inline Json real_to_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double real_from_json(const Json& j) { return j.is_null() ? kInf : j.get<double>(); }

template <class Enum, std::size_t N>
Enum enum_from_string(const std::string& s, const Enum (&all)[N], const char* what) {
  for (Enum e : all)
    if (s == to_string(e)) return e;
  throw DataError(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace detail

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(detail::real_to_json(v[i]));
  return out;
}

inline Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = detail::real_from_json(j[i]);
  return v;
}

inline Selection selection_from_string(const std::string& s) {
  static constexpr Selection all[] = {Selection::Y, Selection::YMinusV};
  return detail::enum_from_string(s, all, "selection");
}

inline SolveStatus status_from_string(const std::string& s) {
  static constexpr SolveStatus all[] = {SolveStatus::Converged, SolveStatus::MaxIterations,
                                        SolveStatus::InnerFailure, SolveStatus::NumericalError};
  return detail::enum_from_string(s, all, "status");
}

inline CertificateKind certificate_kind_from_string(const std::string& s) {
  static constexpr CertificateKind all[] = {CertificateKind::FirstOrder, CertificateKind::SecondOrder,
                                            CertificateKind::ErrorBoundL1};
  return detail::enum_from_string(s, all, "certificate kind");
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(Json& j, const IterationTrace& t) {
  j = Json{{"k", t.k},
           {"L_k", t.L_k},
           {"j_k", t.j_k},
           {"inner_iters", t.inner_iters},
           {"step_norm", t.step_norm},
           {"r_k_y", t.inner_resid},
           {"r_xk", t.outer_resid},
           {"F_xk", t.F_xk},
           {"selection", to_string(t.selection)},
           {"wall_ms", t.wall_ms}};
}

inline void from_json(const Json& j, IterationTrace& t) {
  t.k = j.at("k").get<int>();
  t.L_k = j.at("L_k").get<double>();
  t.j_k = j.at("j_k").get<int>();
  t.inner_iters = j.at("inner_iters").get<int>();
  t.step_norm = j.at("step_norm").get<double>();
  t.inner_resid = j.at("r_k_y").get<double>();
  t.outer_resid = j.at("r_xk").get<double>();
  t.F_xk = j.at("F_xk").get<double>();
  t.selection = selection_from_string(j.at("selection").get<std::string>());
  t.wall_ms = j.at("wall_ms").get<double>();
}

inline void to_json(Json& j, const Certificate& c) {
  Json ev = Json::object();
  for (const auto& [k, v] : c.evidence) ev[k] = detail::real_to_json(v);
  j = Json{{"kind", to_string(c.kind)},
           {"passed", c.passed},
           {"tolerance", c.tolerance},
           {"evidence", ev},
           {"note", c.note}};
}

inline void from_json(const Json& j, Certificate& c) {
  c.kind = certificate_kind_from_string(j.at("kind").get<std::string>());
  c.passed = j.at("passed").get<bool>();
  c.tolerance = j.at("tolerance").get<double>();
  c.evidence.clear();
  for (const auto& [k, v] : j.at("evidence").items()) c.evidence[k] = detail::real_from_json(v);
  c.note = j.value("note", std::string{});
}

inline void to_json(Json& j, const SolverConfig& c) {
  j = Json{{"q", c.q},
           {"rho", c.rho ? Json(*c.rho) : Json(nullptr)},
           {"sigma", c.sigma},
           {"tau", c.tau},
           {"l_min", c.l_min},
           {"l_max", c.l_max},
           {"eps", c.eps},
           {"max_outer", c.max_outer},
           {"max_inner", c.max_inner},
           {"max_backtracks", c.max_backtracks},
           {"seed", c.seed},
           {"delta", c.delta},
           {"l_init", c.l_init == LInitRule::Constant ? "constant" : "bb"},
           {"l_const", c.l_const},
           {"dense_cap", c.dense_cap}};
}

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
inline void from_json(const Json& j, SolverConfig& c) {
  if (!j.is_object()) throw ConfigError("solver");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "q") c.q = v.get<double>();
      else if (key == "rho") c.rho = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
      else if (key == "sigma") c.sigma = v.get<double>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "l_min") c.l_min = v.get<double>();
      else if (key == "l_max") c.l_max = v.get<double>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "max_outer") c.max_outer = v.get<int>();
      else if (key == "max_inner") c.max_inner = v.get<int>();
      else if (key == "max_backtracks") c.max_backtracks = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "delta") c.delta = v.get<double>();
      else if (key == "l_const") c.l_const = v.get<double>();
      else if (key == "dense_cap") c.dense_cap = v.get<Index>();
      else if (key == "l_init") {
        const auto s = v.get<std::string>();
        if (s == "bb") c.l_init = LInitRule::BarzilaiBorwein;
        else if (s == "constant") c.l_init = LInitRule::Constant;
        else throw ConfigError("solver.l_init");
      } else {
        throw ConfigError("solver." + key);
      }
    } catch (const Json::exception&) {
      throw ConfigError("solver." + key);
    }
  }
}

inline void to_json(Json& j, const SolveReport& r) {
  j = Json{{"status", to_string(r.status)},
           {"message", r.message},
           {"iterations", r.iterations()},
           {"F_final", detail::real_to_json(r.F_final)},
           {"resid_final", detail::real_to_json(r.resid_final)},
           {"rate_estimate", r.rate_estimate ? Json(*r.rate_estimate) : Json(nullptr)},
           {"L0", r.L0},
           {"rho", r.rho},
           {"x_final", vector_to_json(r.x_final)},
           {"traces", r.traces},
           {"certificates", r.certificates}};
}

inline void from_json(const Json& j, SolveReport& r) {
  r.status = status_from_string(j.at("status").get<std::string>());
  r.message = j.value("message", std::string{});
  r.F_final = detail::real_from_json(j.at("F_final"));
  r.resid_final = detail::real_from_json(j.at("resid_final"));
  const auto& rate = j.at("rate_estimate");
  r.rate_estimate = rate.is_null() ? std::nullopt : std::optional<double>(rate.get<double>());
  r.L0 = j.at("L0").get<double>();
  r.rho = j.at("rho").get<double>();
  r.x_final = vector_from_json(j.at("x_final"));
  r.traces = j.at("traces").get<std::vector<IterationTrace>>();
  r.certificates = j.at("certificates").get<std::vector<Certificate>>();
}

inline bool same_report(const SolveReport& a, const SolveReport& b) {
  return a.status == b.status && a.message == b.message && a.x_final == b.x_final &&
         a.F_final == b.F_final && a.resid_final == b.resid_final && a.traces == b.traces &&
         a.rate_estimate == b.rate_estimate && a.L0 == b.L0 && a.rho == b.rho &&
         a.certificates == b.certificates;
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Trace CSV

inline constexpr const char* kTraceHeader =
    "k,L_k,j_k,inner_iters,step_norm,r_k_y,r_xk,F_xk,selection,wall_ms";

inline void write_trace_csv(std::ostream& out, const std::vector<IterationTrace>& traces) {
  out << kTraceHeader << "\n";
  char buf[512];
  for (const auto& t : traces) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g,%s,%.3f", t.k, t.L_k,
                  t.j_k, t.inner_iters, t.step_norm, t.inner_resid, t.outer_resid, t.F_xk,
                  to_string(t.selection), t.wall_ms);
    out << buf << "\n";
  }
}

inline std::vector<IterationTrace> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ParseError(1, "bad trace header");
  std::vector<IterationTrace> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw ParseError(line_no, "expected 10 columns");
    try {
      IterationTrace t;
      t.k = std::stoi(cells[0]);
      t.L_k = std::stod(cells[1]);
      t.j_k = std::stoi(cells[2]);
      t.inner_iters = std::stoi(cells[3]);
      t.step_norm = std::stod(cells[4]);
      t.inner_resid = std::stod(cells[5]);
      t.outer_resid = std::stod(cells[6]);
      t.F_xk = std::stod(cells[7]);
      t.selection = selection_from_string(cells[8]);
      t.wall_ms = std::stod(cells[9]);
      out.push_back(t);
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "malformed trace row");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Raw binary matrices: little-endian doubles, column-major, shape kept elsewhere.

inline void write_matrix_bin(const std::string& path, const Matrix& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(a.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(a.size())));
}

inline Matrix read_matrix_bin(const std::string& path, Index rows, Index cols) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != sizeof(double) * static_cast<std::size_t>(rows * cols)) {
    throw DataError(path + ": size does not match shape " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
  in.seekg(0);
  Matrix a(rows, cols);
  in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(bytes));
  return a;
}

}  // namespace qreg
