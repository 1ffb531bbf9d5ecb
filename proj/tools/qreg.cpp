// qreg: solve, generate, bench and check from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "qreg/bench.hpp"
#include "qreg/run.hpp"

namespace {

using namespace qreg;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("qreg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("QREG_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

int exit_code(SolveStatus s) { return s == SolveStatus::Converged ? kExitOk : kExitNotConverged; }

// Flags shared by solve and bench. Absent flags leave the spec untouched.
struct SolverFlags {
  double q = 0, sigma = 0, tau = 0, eps = 0, lmin = 0, lmax = 0;
  int max_iter = 0, inner_max_iter = 0;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App& app) {
    opts["q"] = app.add_option("--q", q, "regularization order in [2, 3]");
    opts["sigma"] = app.add_option("--sigma", sigma, "descent constant in (0, 1)");
    opts["tau"] = app.add_option("--tau", tau, "growth factor for L (> 1)");
    opts["eps"] = app.add_option("--eps", eps, "residual tolerance");
    opts["lmin"] = app.add_option("--lmin", lmin, "lower bound on L");
    opts["lmax"] = app.add_option("--lmax", lmax, "upper bound on L");
    opts["max-iter"] = app.add_option("--max-iter", max_iter, "outer iteration budget");
    opts["inner-max-iter"] = app.add_option("--inner-max-iter", inner_max_iter, "inner iteration budget");
    opts["seed"] = app.add_option("--seed", seed, "generator and certificate seed");
  }

  bool given(const char* name) const { return opts.at(name)->count() > 0; }

  void apply(RunSpec& s) const {
    if (given("q")) s.solver.q = q;
    if (given("sigma")) s.solver.sigma = sigma;
    if (given("tau")) s.solver.tau = tau;
    if (given("eps")) s.solver.eps = eps;
    if (given("lmin")) s.solver.l_min = lmin;
    if (given("lmax")) s.solver.l_max = lmax;
    if (given("max-iter")) s.solver.max_outer = max_iter;
    if (given("inner-max-iter")) s.solver.max_inner = inner_max_iter;
    if (given("seed")) s.seed = seed;
  }
};

struct ProblemFlags {
  std::string family, data;
  bool generate = false;
  double lambda = 0, c_lambda = 0, nu = 0, d = 0, noise = 0;
  std::vector<double> omega;
  long m = 0, n = 0, support = 0, assets = 0, periods = 0;
  bool raw_returns = false;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App& app) {
    opts["problem"] = app.add_option("--problem", family, "logistic | student_t | mvsk")
                          ->check(CLI::IsMember({"logistic", "student_t", "mvsk"}));
    opts["data"] = app.add_option("--data", data, "LIBSVM file, returns CSV, or instance manifest");
    opts["generate"] = app.add_flag("--generate", generate, "use the seeded generator");
    opts["lambda"] = app.add_option("--lambda", lambda, "l1 weight (logistic)");
    opts["c-lambda"] = app.add_option("--c-lambda", c_lambda, "lambda / |grad f(0)|_inf (student_t)");
    opts["nu"] = app.add_option("--nu", nu, "Student's t scale (student_t)");
    opts["d"] = app.add_option("--d", d, "dynamic range in dB (student_t)");
    opts["omega"] = app.add_option("--omega", omega, "four preference weights (mvsk)")
                        ->expected(4)
                        ->delimiter(',');
    opts["m"] = app.add_option("--m", m, "samples (logistic generator)");
    opts["n"] = app.add_option("--n", n, "dimension (logistic / student_t generator)");
    opts["support"] = app.add_option("--support", support, "true support size (logistic generator)");
    opts["noise"] = app.add_option("--noise", noise, "noise level (generators)");
    opts["assets"] = app.add_option("--assets", assets, "assets (mvsk generator)");
    opts["periods"] = app.add_option("--periods", periods, "periods (mvsk generator)");
    opts["raw-returns"] = app.add_flag("--raw-returns", raw_returns, "CSV already holds returns");
  }

  bool given(const char* name) const { return opts.at(name)->count() > 0; }

  void apply(RunSpec& s) const {
    ProblemSpec& p = s.problem;
    if (given("problem")) p.family = family_from_string(family);
    if (given("lambda")) p.lambda = lambda;
    if (given("c-lambda")) p.student_t.c_lambda = c_lambda;
    if (given("nu")) p.student_t.nu = nu;
    if (given("omega")) std::copy(omega.begin(), omega.end(), p.omega.begin());
    if (given("raw-returns")) p.log_returns = !raw_returns;
    bool gen_params = false;
    const auto set = [&](const char* name, auto& dst, auto value) {
      if (!given(name)) return;
      dst = static_cast<std::decay_t<decltype(dst)>>(value);
      gen_params = true;
    };
    set("d", p.student_t.d, d);
    set("m", p.logistic.m, m);
    if (given("n")) {
      p.logistic.n = n;
      p.student_t.n = n;
      gen_params = true;
    }
    set("support", p.logistic.support, support);
    if (given("noise")) {
      p.logistic.noise = noise;
      p.student_t.noise_scale = noise;
      gen_params = true;
    }
    set("assets", p.returns.assets, assets);
    set("periods", p.returns.periods, periods);
    if (given("data") && (generate || gen_params)) {
      throw ConfigError("problem: exactly one of --data and generator parameters");
    }
    if (given("data")) {
      p.data = data;
      p.generator = false;
    } else if (generate || gen_params) {
      p.data.reset();
      p.generator = true;
    }
  }
};

void log_report(const SolveReport& rep) {
  for (const auto& t : rep.traces) {
    spdlog::debug("k={} L={:.3e} j={} inner={} step={:.3e} r_k(y)={:.3e} r(x)={:.3e} F={:.10g} {}",
                  t.k, t.L_k, t.j_k, t.inner_iters, t.step_norm, t.inner_resid, t.outer_resid,
                  t.F_xk, to_string(t.selection));
  }
}

int cmd_solve(const std::string& config, const std::string& out_dir, const std::string& trace,
              const std::string& report_path, const SolverFlags& sf, const ProblemFlags& pf) {
  RunSpec spec;
  if (!config.empty()) merge_run_spec(load_json(config), spec);
  pf.apply(spec);
  sf.apply(spec);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    spec.trace_path = out_dir + "/trace.csv";
    spec.report_path = out_dir + "/report.json";
  }
  if (!trace.empty()) spec.trace_path = trace;
  if (!report_path.empty()) spec.report_path = report_path;
  spec = validate_run_spec(spec);

  spdlog::info("solving {} (q={}, eps={:g})", to_string(spec.problem.family), spec.solver.q,
               spec.solver.eps);
  const SolveReport rep = execute(spec);
  log_report(rep);
  write_outputs(spec, rep);
  std::cout << "status=" << to_string(rep.status) << " iter=" << rep.iterations()
            << " F=" << rep.F_final << " resid=" << rep.resid_final
            << " xnz=" << count_nonzeros(rep.x_final) << "\n";
  for (const auto& c : rep.certificates) {
    std::cout << "certificate " << to_string(c.kind) << (c.passed ? " passed" : " failed");
    if (!c.note.empty()) std::cout << " (" << c.note << ")";
    std::cout << "\n";
  }
  if (!rep.message.empty() && rep.status != SolveStatus::Converged) {
    spdlog::warn("{}", rep.message);
  }
  return exit_code(rep.status);
}

int cmd_generate(const std::string& out_dir, const SolverFlags& sf, const ProblemFlags& pf,
                 bool write_prices) {
  if (out_dir.empty()) throw ConfigError("--out");
  if (!pf.given("problem")) throw ConfigError("--problem");
  RunSpec spec;
  pf.apply(spec);
  sf.apply(spec);
  std::filesystem::create_directories(out_dir);
  const ProblemSpec& p = spec.problem;
  switch (p.family) {
    case Family::Logistic: {
      LogisticParams lp = p.logistic;
      lp.seed = spec.seed;
      const auto inst = gen_logistic_instance(lp);
      std::ofstream out(out_dir + "/data.libsvm");
      write_libsvm(out, inst.A, inst.b);
      save_json(out_dir + "/manifest.json",
                Json{{"family", "logistic"}, {"m", lp.m}, {"n", lp.n}, {"support", lp.support},
                     {"noise", lp.noise}, {"seed", lp.seed}, {"files", {{"data", "data.libsvm"}}}});
      break;
    }
    case Family::StudentT: {
      StudentTParams sp = p.student_t;
      sp.seed = spec.seed;
      if (sp.d != 20.0 && sp.d != 40.0 && sp.d != 60.0 && sp.d != 80.0) {
        spdlog::warn("d = {} dB is outside the usual grid {{20, 40, 60, 80}}", sp.d);
      }
      if (sp.n % 8 != 0) spdlog::warn("n = {} is not divisible by 8; m = floor(n/8)", sp.n);
      write_student_t_instance(gen_student_t_instance(sp), out_dir);
      break;
    }
    case Family::Mvsk: {
      if (p.data) {
        const auto table = load_returns_csv(*p.data, p.log_returns);
        write_moments(sample_moments(table.returns), out_dir,
                      Json{{"returns_csv", *p.data}, {"log_returns", p.log_returns}});
      } else {
        SyntheticReturnsParams rp = p.returns;
        rp.seed = spec.seed;
        if (write_prices) {
          std::ofstream out(out_dir + "/prices.csv");
          write_prices_csv(out, gen_synthetic_prices(rp));
        }
        write_moments(gen_synthetic_moments(rp), out_dir,
                      Json{{"synthetic", {{"assets", rp.assets}, {"periods", rp.periods}, {"seed", rp.seed}}}});
      }
      break;
    }
  }
  std::cout << "wrote " << out_dir << "/manifest.json\n";
  return kExitOk;
}

std::vector<double> parse_q_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::logic_error&) {
      throw ConfigError("q_list");
    }
  }
  return out;
}

int cmd_bench(const std::string& suite, const std::optional<std::string>& q_text,
              const std::string& out_dir, const SolverFlags& sf) {
  const std::vector<double> q_list = q_text ? parse_q_list(*q_text) : default_q_list(suite);
  if (q_list.empty()) {
    spdlog::error("empty q list");
    return kExitError;
  }
  const std::string dir = out_dir.empty() ? "bench_" + suite : out_dir;
  std::filesystem::create_directories(dir + "/traces");
  auto rows = suite_rows(suite, q_list);
  std::ofstream table(dir + "/results.csv");
  table << kResultsHeader << "\n";
  std::cout << kResultsHeader << "\n";
  bool any_failed = false;
  std::map<int, int> j_hist;
  for (auto& row : rows) {
    sf.apply(row.spec);
    const BenchResult r = run_row(row);
    if (!r.error.empty()) spdlog::error("{}: {}", row.label, r.error);
    if (r.report) {
      std::ofstream tr(dir + "/traces/" + row.label + ".csv");
      write_trace_csv(tr, r.report->traces);
      for (const auto& t : r.report->traces) ++j_hist[t.j_k];
    }
    any_failed = any_failed || !r.ok();
    const std::string line = results_line(r);
    table << line << "\n";
    std::cout << line << std::endl;
  }
  std::string hist;
  for (const auto& [j, count] : j_hist) hist += " j=" + std::to_string(j) + ":" + std::to_string(count);
  spdlog::info("backtrack counts:{}", hist.empty() ? " none" : hist);
  return any_failed ? kExitNotConverged : kExitOk;
}

int cmd_check(const std::string& report_path, const std::string& config, double tol) {
  const Json j = load_json(report_path);
  RunSpec spec;
  if (j.contains("run")) merge_run_spec(j.at("run"), spec);
  if (!config.empty()) merge_run_spec(load_json(config), spec);
  spec = validate_run_spec(spec);
  const SolveReport saved = j.get<SolveReport>();
  const BuiltRun run = build_run(spec);
  if (saved.x_final.size() != run.problem.dim()) throw DataError("saved solution has the wrong dimension");

  std::vector<Certificate> certs = certify(run.problem, saved.x_final, spec.solver);
  if (tol > 0.0) {
    certs.front() = first_order_check(run.problem, saved.x_final, tol);
  }
  std::cout << Json(certs).dump(2) << "\n";
  bool all = true;
  for (const auto& c : certs) all = all && c.passed;
  return all ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Inexact q-order regularized proximal Newton solver"};
  app.require_subcommand(1);

  auto* solve_cmd = app.add_subcommand("solve", "solve one configured instance");
  std::string config, out_dir, trace, report;
  SolverFlags solve_sf;
  ProblemFlags solve_pf;
  solve_cmd->add_option("--config", config, "JSON run spec; flags override it");
  solve_cmd->add_option("--out", out_dir, "directory for trace.csv and report.json");
  solve_cmd->add_option("--trace", trace, "trace CSV path");
  solve_cmd->add_option("--report", report, "report JSON path");
  solve_sf.add(*solve_cmd);
  solve_pf.add(*solve_cmd);

  auto* gen_cmd = app.add_subcommand("generate", "write a seeded instance and its manifest");
  std::string gen_out;
  bool write_prices = false;
  SolverFlags gen_sf;
  ProblemFlags gen_pf;
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_flag("--prices", write_prices, "also write the synthetic prices CSV (mvsk)");
  gen_sf.add(*gen_cmd);
  gen_pf.add(*gen_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "run a benchmark suite across q values");
  std::string suite, bench_out;
  std::optional<std::string> q_text;
  SolverFlags bench_sf;
  bench_cmd->add_option("--suite", suite, "suite name")->required()->check(CLI::IsMember(suite_names()));
  bench_cmd->add_option("--q-list", q_text, "comma-separated q values");
  bench_cmd->add_option("--out", bench_out, "output directory");
  bench_sf.add(*bench_cmd);

  auto* check_cmd = app.add_subcommand("check", "re-run certificates on a saved solution");
  std::string check_report, check_config;
  double check_tol = 0.0;
  check_cmd->add_option("--report", check_report, "report JSON written by solve")->required();
  check_cmd->add_option("--config", check_config, "run spec, if the report lacks one");
  check_cmd->add_option("--eps", check_tol, "first-order tolerance (default: the run's eps)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve_cmd) return cmd_solve(config, out_dir, trace, report, solve_sf, solve_pf);
    if (*gen_cmd) return cmd_generate(gen_out, gen_sf, gen_pf, write_prices);
    if (*bench_cmd) return cmd_bench(suite, q_text, bench_out, bench_sf);
    if (*check_cmd) return cmd_check(check_report, check_config, check_tol);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
  } catch (const ParseError& e) {
    spdlog::error("parse error: {}", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
  }
  return kExitError;
}
