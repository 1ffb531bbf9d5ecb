#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "qreg/io.hpp"
#include "qreg/qreg.hpp"

namespace qreg {

enum class Family { Logistic, StudentT, Mvsk };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Logistic: return "logistic";
    case Family::StudentT: return "student_t";
    case Family::Mvsk: return "mvsk";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "logistic") return Family::Logistic;
  if (s == "student_t") return Family::StudentT;
  if (s == "mvsk") return Family::Mvsk;
  throw ConfigError("problem.family");
}

/// Problem half of a run: the family, its parameters, and where the data
/// comes from. Exactly one of `data` and `generator` is set.
struct ProblemSpec {
  Family family = Family::Logistic;
  std::optional<std::string> data;
  bool generator = false;

  // logistic
  double lambda = 1e-4;
  LogisticParams logistic;
  // student_t
  StudentTParams student_t;
  // mvsk
  std::array<double, 4> omega{0.29, 0.21, 0.4, 0.1};
  SyntheticReturnsParams returns;
  bool log_returns = true;
};

struct RunSpec {
  ProblemSpec problem;
  SolverConfig solver;
  std::uint64_t seed = 0;
  std::string trace_path;
  std::string report_path;
};

inline RunSpec validate_run_spec(RunSpec spec) {
  if (spec.problem.data.has_value() == spec.problem.generator) {
    throw ConfigError("problem: exactly one of data and generator");
  }
  spec.solver.seed = spec.seed;
  spec.solver = validate_config(spec.solver);
  return spec;
}

// ---------------------------------------------------------------------------
// JSON form

inline Json problem_to_json(const ProblemSpec& p) {
  Json j{{"family", to_string(p.family)}};
  if (p.data) j["data"] = *p.data;
  switch (p.family) {
    case Family::Logistic:
      j["lambda"] = p.lambda;
      if (p.generator) {
        j["generator"] = {{"m", p.logistic.m},
                          {"n", p.logistic.n},
                          {"support", p.logistic.support},
                          {"noise", p.logistic.noise}};
      }
      break;
    case Family::StudentT:
      j["c_lambda"] = p.student_t.c_lambda;
      j["nu"] = p.student_t.nu;
      if (p.generator) {
        j["generator"] = {{"n", p.student_t.n},
                          {"d", p.student_t.d},
                          {"noise_scale", p.student_t.noise_scale},
                          {"noise_dof", p.student_t.noise_dof}};
      }
      break;
    case Family::Mvsk:
      j["omega"] = p.omega;
      j["log_returns"] = p.log_returns;
      if (p.generator) j["generator"] = {{"assets", p.returns.assets}, {"periods", p.returns.periods}};
      break;
  }
  return j;
}

inline Json run_spec_to_json(const RunSpec& s) {
  Json j{{"problem", problem_to_json(s.problem)}, {"solver", s.solver}, {"seed", s.seed}};
  Json out = Json::object();
  if (!s.trace_path.empty()) out["trace"] = s.trace_path;
  if (!s.report_path.empty()) out["report"] = s.report_path;
  j["outputs"] = out;
  return j;
}

namespace detail {

template <class T>
void read_key(const Json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + key);
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  for (const auto& [key, v] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(where + "." + key);
  }
}

}  // namespace detail

/// Overlays the keys present in `j` onto `spec`.
inline void merge_run_spec(const Json& j, RunSpec& spec) {
  if (!j.is_object()) throw ConfigError("run spec must be a JSON object");
  detail::reject_unknown(j, {"problem", "solver", "seed", "outputs"}, "spec");
  detail::read_key(j, "seed", spec.seed, "spec");
  if (j.contains("solver")) from_json(j.at("solver"), spec.solver);
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    detail::reject_unknown(o, {"trace", "report"}, "outputs");
    detail::read_key(o, "trace", spec.trace_path, "outputs");
    detail::read_key(o, "report", spec.report_path, "outputs");
  }
  if (!j.contains("problem")) return;
  const auto& p = j.at("problem");
  ProblemSpec& ps = spec.problem;
  detail::reject_unknown(p, {"family", "data", "generator", "lambda", "c_lambda", "nu", "omega",
                             "log_returns"},
                         "problem");
  if (p.contains("family")) ps.family = family_from_string(p.at("family").get<std::string>());
  if (p.contains("data")) {
    ps.data = p.at("data").get<std::string>();
    ps.generator = false;
  }
  detail::read_key(p, "lambda", ps.lambda, "problem");
  detail::read_key(p, "c_lambda", ps.student_t.c_lambda, "problem");
  detail::read_key(p, "nu", ps.student_t.nu, "problem");
  detail::read_key(p, "omega", ps.omega, "problem");
  detail::read_key(p, "log_returns", ps.log_returns, "problem");
  if (p.contains("generator")) {
    const auto& g = p.at("generator");
    if (!g.is_object()) throw ConfigError("problem.generator");
    ps.generator = true;
    if (p.contains("data")) throw ConfigError("problem: exactly one of data and generator");
    ps.data.reset();
    const std::string w = "problem.generator";
    switch (ps.family) {
      case Family::Logistic:
        detail::reject_unknown(g, {"m", "n", "support", "noise"}, w);
        detail::read_key(g, "m", ps.logistic.m, w);
        detail::read_key(g, "n", ps.logistic.n, w);
        detail::read_key(g, "support", ps.logistic.support, w);
        detail::read_key(g, "noise", ps.logistic.noise, w);
        break;
      case Family::StudentT:
        detail::reject_unknown(g, {"n", "d", "noise_scale", "noise_dof"}, w);
        detail::read_key(g, "n", ps.student_t.n, w);
        detail::read_key(g, "d", ps.student_t.d, w);
        detail::read_key(g, "noise_scale", ps.student_t.noise_scale, w);
        detail::read_key(g, "noise_dof", ps.student_t.noise_dof, w);
        break;
      case Family::Mvsk:
        detail::reject_unknown(g, {"assets", "periods"}, w);
        detail::read_key(g, "assets", ps.returns.assets, w);
        detail::read_key(g, "periods", ps.returns.periods, w);
        break;
    }
  }
}

inline RunSpec run_spec_from_json(const Json& j) {
  RunSpec spec;
  merge_run_spec(j, spec);
  return validate_run_spec(spec);
}

// ---------------------------------------------------------------------------
// Instance manifests written by `generate`

inline Json student_t_manifest(const StudentTInstance& inst) {
  const auto& p = inst.params;
  return Json{{"family", "student_t"},
              {"n", p.n},
              {"d", p.d},
              {"seed", p.seed},
              {"c_lambda", p.c_lambda},
              {"nu", p.nu},
              {"noise_scale", p.noise_scale},
              {"noise_dof", p.noise_dof},
              {"m", inst.m},
              {"lambda", inst.lambda},
              {"rows", inst.rows},
              {"files", {{"x_true", "x_true.bin"}, {"b", "b.bin"}}}};
}

inline void write_student_t_instance(const StudentTInstance& inst, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_bin(dir + "/x_true.bin", inst.x_true);
  write_matrix_bin(dir + "/b.bin", inst.b);
  save_json(dir + "/manifest.json", student_t_manifest(inst));
}

/// Regenerates the instance from the manifest parameters and confirms it
/// against the stored observations bit for bit.
inline StudentTInstance load_student_t_instance(const std::string& manifest_path) {
  const Json j = load_json(manifest_path);
  if (j.value("family", std::string{}) != "student_t") {
    throw DataError(manifest_path + ": not a student_t manifest");
  }
  StudentTParams p;
  p.n = j.at("n").get<Index>();
  p.d = j.at("d").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.c_lambda = j.at("c_lambda").get<double>();
  p.nu = j.at("nu").get<double>();
  p.noise_scale = j.at("noise_scale").get<double>();
  p.noise_dof = j.at("noise_dof").get<int>();
  StudentTInstance inst = gen_student_t_instance(p);
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  const Matrix b = read_matrix_bin((dir / j.at("files").at("b").get<std::string>()).string(), inst.m, 1);
  if (b.col(0) != inst.b) throw DataError(manifest_path + ": stored b does not match regeneration");
  return inst;
}

inline void write_moments(const Moments& m, const std::string& dir, const Json& source) {
  std::filesystem::create_directories(dir);
  write_matrix_bin(dir + "/mu.bin", m.mu);
  write_matrix_bin(dir + "/Sigma.bin", m.Sigma);
  write_matrix_bin(dir + "/S.bin", m.S);
  write_matrix_bin(dir + "/K.bin", m.K);
  save_json(dir + "/manifest.json",
            Json{{"family", "mvsk"},
                 {"assets", m.assets()},
                 {"source", source},
                 {"files", {{"mu", "mu.bin"}, {"Sigma", "Sigma.bin"}, {"S", "S.bin"}, {"K", "K.bin"}}}});
}

inline Moments load_moments(const std::string& manifest_path) {
  const Json j = load_json(manifest_path);
  if (j.value("family", std::string{}) != "mvsk") throw DataError(manifest_path + ": not an mvsk manifest");
  const Index n = j.at("assets").get<Index>();
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  const auto file = [&](const char* key) {
    return (dir / j.at("files").at(key).get<std::string>()).string();
  };
  Moments m;
  m.mu = read_matrix_bin(file("mu"), n, 1).col(0);
  m.Sigma = read_matrix_bin(file("Sigma"), n, n);
  m.S = read_matrix_bin(file("S"), n, n * n);
  m.K = read_matrix_bin(file("K"), n, n * n * n);
  return m;
}

// ---------------------------------------------------------------------------
// Problem construction

struct BuiltRun {
  CompositeProblem problem;
  Vector x0;
};

namespace detail {

inline bool is_manifest(const std::string& path) {
  return std::filesystem::path(path).extension() == ".json";
}

}  // namespace detail

inline BuiltRun build_run(const RunSpec& raw) {
  const RunSpec spec = validate_run_spec(raw);
  const ProblemSpec& p = spec.problem;
  switch (p.family) {
    case Family::Logistic: {
      if (p.data) {
        const LibsvmData d = load_libsvm(*p.data);
        auto prob = logistic_oracle(d.A, d.b, p.lambda);
        return {prob, Vector::Zero(prob.dim())};
      }
      LogisticParams lp = p.logistic;
      lp.seed = spec.seed;
      const LogisticInstance inst = gen_logistic_instance(lp);
      auto prob = logistic_oracle(inst.A, inst.b, p.lambda);
      return {prob, Vector::Zero(prob.dim())};
    }
    case Family::StudentT: {
      StudentTInstance inst;
      if (p.data) {
        inst = load_student_t_instance(*p.data);
      } else {
        StudentTParams sp = p.student_t;
        sp.seed = spec.seed;
        inst = gen_student_t_instance(sp);
      }
      return {inst.problem(), inst.x0()};
    }
    case Family::Mvsk: {
      Moments m;
      if (p.data) {
        m = detail::is_manifest(*p.data) ? load_moments(*p.data)
                                         : sample_moments(load_returns_csv(*p.data, p.log_returns).returns);
      } else {
        SyntheticReturnsParams rp = p.returns;
        rp.seed = spec.seed;
        m = gen_synthetic_moments(rp);
      }
      const Index n = m.assets();
      return {mvsk_oracle(std::move(m), p.omega), Vector::Constant(n, 1.0 / static_cast<double>(n))};
    }
  }
  throw ConfigError("problem.family");
}

/// First-order, second-order and (for l1) error-bound certificates at x.
/// Checks that cannot run at this size are recorded as failed with a note.
inline std::vector<Certificate> certify(const CompositeProblem& problem, const Vector& x,
                                        const SolverConfig& cfg) {
  std::vector<Certificate> out;
  out.push_back(first_order_check(problem, x, cfg.eps));
  const auto guarded = [&](CertificateKind kind, auto&& run) {
    try {
      out.push_back(run());
    } catch (const NotCheckable& e) {
      Certificate c;
      c.kind = kind;
      c.tolerance = kDefaultCertificateTol;
      c.note = std::string("not checkable: ") + e.what();
      out.push_back(c);
    }
  };
  guarded(CertificateKind::SecondOrder, [&] {
    return second_order_check(problem, x, kDefaultCertificateTol, cfg.seed, 10000, cfg.dense_cap);
  });
  if (dynamic_cast<const L1Norm*>(problem.g.get())) {
    guarded(CertificateKind::ErrorBoundL1, [&] {
      return error_bound_check_l1(problem, x, kDefaultCertificateTol, cfg.dense_cap);
    });
  }
  return out;
}

/// Builds, solves and certifies one run; the caller owns writing outputs.
inline SolveReport execute(const RunSpec& spec, const StepObserver& observer = {}) {
  const RunSpec s = validate_run_spec(spec);
  const BuiltRun run = build_run(s);
  SolveReport report = solve(run.problem, run.x0, s.solver, observer);
  report.certificates = certify(run.problem, report.x_final, s.solver);
  return report;
}

inline void write_outputs(const RunSpec& spec, const SolveReport& report) {
  if (!spec.trace_path.empty()) {
    std::ofstream out(spec.trace_path);
    if (!out) throw DataError("cannot write " + spec.trace_path);
    write_trace_csv(out, report.traces);
  }
  if (!spec.report_path.empty()) {
    Json j = report;
    j["run"] = run_spec_to_json(spec);
    save_json(spec.report_path, j);
  }
}

}  // namespace qreg
