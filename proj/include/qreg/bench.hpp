#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qreg/run.hpp"

namespace qreg {

struct BenchRow {
  std::string label;
  RunSpec spec;
};

struct BenchResult {
  BenchRow row;
  std::optional<SolveReport> report;  // empty when the row could not run
  std::string error;
  double seconds = 0.0;
  int xnz = 0;
  std::optional<double> h_min;

  bool ok() const { return report && report->status == SolveStatus::Converged; }
};

/// colon-cancer in LIBSVM format: $QREG_COLON_CANCER, then data/colon-cancer
/// under the working directory and under `source_dir`.
inline std::optional<std::string> find_colon_cancer(const std::string& source_dir = {}) {
  if (const char* env = std::getenv("QREG_COLON_CANCER"); env && *env) {
    if (std::filesystem::exists(env)) return std::string(env);
  }
  for (const auto& base : {std::string("."), source_dir}) {
    if (base.empty()) continue;
    const auto p = std::filesystem::path(base) / "data" / "colon-cancer";
    if (std::filesystem::exists(p)) return p.string();
  }
  return std::nullopt;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"logistic_small", "student_t_desk", "mvsk_desk",
                                              "rate_sweep"};
  return names;
}

inline std::vector<double> default_q_list(const std::string& suite) {
  if (suite == "logistic_small") return {2.7};
  if (suite == "rate_sweep") return {2.1, 2.5, 3.0};
  return {2.3};
}

/// The small logistic instance used for rate comparisons across q.
inline RunSpec rate_sweep_spec(double q) {
  RunSpec s;
  s.problem.family = Family::Logistic;
  s.problem.generator = true;
  s.problem.logistic.m = 200;
  s.problem.logistic.n = 200;
  s.problem.lambda = 1e-2;
  s.seed = 2;
  s.solver.q = q;
  s.solver.eps = 1e-10;
  return s;
}

inline RunSpec colon_cancer_spec(const std::string& path, double lambda, double q) {
  RunSpec s;
  s.problem.family = Family::Logistic;
  s.problem.data = path;
  s.problem.lambda = lambda;
  s.solver.q = q;
  s.solver.eps = 1e-6;
  return s;
}

inline RunSpec student_t_desk_spec(double d, std::uint64_t seed, double q) {
  RunSpec s;
  s.problem.family = Family::StudentT;
  s.problem.generator = true;
  s.problem.student_t.n = 4096;
  s.problem.student_t.d = d;
  s.seed = seed;
  s.solver.q = q;
  s.solver.eps = 1e-5;
  return s;
}

inline RunSpec mvsk_desk_spec(std::uint64_t seed, double q) {
  RunSpec s;
  s.problem.family = Family::Mvsk;
  s.problem.generator = true;
  s.seed = seed;
  s.solver.q = q;
  s.solver.eps = 4e-6;
  return s;
}

namespace detail {

inline std::string q_tag(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%g", q);
  return buf;
}

}  // namespace detail

/// Rows of a suite; a missing dataset yields a row whose data path is empty.
inline std::vector<BenchRow> suite_rows(const std::string& suite, const std::vector<double>& q_list,
                                        const std::string& source_dir = {}) {
  if (q_list.empty()) throw ConfigError("q_list");
  std::vector<BenchRow> rows;
  for (double q : q_list) {
    const std::string tag = detail::q_tag(q);
    if (suite == "logistic_small") {
      const auto path = find_colon_cancer(source_dir);
      for (double lambda : {1e-4, 1e-6}) {
        char label[64];
        std::snprintf(label, sizeof label, "colon-cancer_lambda%g_%s", lambda, tag.c_str());
        rows.push_back({label, colon_cancer_spec(path.value_or(""), lambda, q)});
      }
    } else if (suite == "student_t_desk") {
      for (double d : {20.0, 40.0})
        for (std::uint64_t seed : {1, 2, 3}) {
          rows.push_back({"student_t_d" + std::to_string(static_cast<int>(d)) + "_seed" +
                              std::to_string(seed) + "_" + tag,
                          student_t_desk_spec(d, seed, q)});
        }
    } else if (suite == "mvsk_desk") {
      for (std::uint64_t seed : {1, 2, 3}) {
        rows.push_back({"mvsk_seed" + std::to_string(seed) + "_" + tag, mvsk_desk_spec(seed, q)});
      }
    } else if (suite == "rate_sweep") {
      rows.push_back({"logistic_200x200_" + tag, rate_sweep_spec(q)});
    } else {
      throw ConfigError("suite");
    }
  }
  return rows;
}

inline BenchResult run_row(const BenchRow& row, const StepObserver& observer = {}) {
  BenchResult r;
  r.row = row;
  if (row.spec.problem.data && row.spec.problem.data->empty()) {
    r.error = "dataset not found (set QREG_COLON_CANCER or place it at data/colon-cancer)";
    return r;
  }
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.report = execute(row.spec, observer);
  } catch (const Error& e) {
    r.error = e.what();
    return r;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.xnz = count_nonzeros(r.report->x_final);
  for (const auto& c : r.report->certificates) {
    if (c.kind != CertificateKind::SecondOrder) continue;
    for (const char* key : {"H_min", "tangent_min_eig"}) {
      if (auto it = c.evidence.find(key); it != c.evidence.end()) r.h_min = it->second;
    }
  }
  return r;
}

inline constexpr const char* kResultsHeader =
    "row,q,status,iter,Fval,resi,time_s,xnz,H_min,rate,max_j";

inline std::string results_line(const BenchResult& r) {
  char buf[512];
  if (!r.report) {
    std::snprintf(buf, sizeof buf, "%s,%g,Error,,,,,,,,", r.row.label.c_str(), r.row.spec.solver.q);
    return buf;
  }
  const auto& rep = *r.report;
  int max_j = 0;
  for (const auto& t : rep.traces) max_j = std::max(max_j, t.j_k);
  const auto opt = [](const std::optional<double>& v) {
    char b[40];
    if (!v) return std::string{};
    std::snprintf(b, sizeof b, "%.6g", *v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%s,%g,%s,%d,%.10g,%.3e,%.3f,%d,%s,%s,%d", r.row.label.c_str(),
                r.row.spec.solver.q, to_string(rep.status), rep.iterations(), rep.F_final,
                rep.resid_final, r.seconds, r.xnz, opt(r.h_min).c_str(),
                opt(rep.rate_estimate).c_str(), max_j);
  return buf;
}

}  // namespace qreg
