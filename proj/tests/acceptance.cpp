// Acceptance run: one PASS/FAIL line per criterion.
// Exit 0 when all pass, 77 when the only failures are criteria that need a
// dataset that is not present, 1 otherwise.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "qreg/bench.hpp"
#include "qreg/run.hpp"

using namespace qreg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  bool needs_data = false;
  std::string detail;
};

std::map<int, Outcome> outcomes;

void record(int id, bool pass, std::string detail, bool needs_data = false) {
  outcomes[id] = {pass, needs_data, std::move(detail)};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Per-iteration audits shared by every run.
struct Audit {
  int runs = 0;
  long accepted = 0;
  long descent_violations = 0;
  long inexact_violations = 0;
  int max_j = 0;
  std::map<int, long> j_hist;
};

Audit audit;

struct AuditedRun {
  SolveReport report;
  double seconds = 0.0;
};

AuditedRun run_audited(const RunSpec& raw) {
  const RunSpec spec = validate_run_spec(raw);
  const BuiltRun built = build_run(spec);
  const ProxFriendly& g = *built.problem.g;
  const auto observer = [&](const AcceptedStep& s) {
    ++audit.accepted;
    const double q = s.model.q;
    const double step = (s.y - s.model.anchor).norm();
    const double Fy = s.next.F_y.value();
    if (!(s.next.F.value() <= Fy) || !(Fy <= s.F_x - s.sigma * (s.l_min / q) * std::pow(step, q))) {
      ++audit.descent_violations;
    }
    const double rk = subproblem_residual(s.model, g, s.y).norm;
    const double theta_y = subproblem_objective(s.model, g, s.y);
    const double theta_x = subproblem_objective(s.model, g, s.model.anchor);
    if (!(rk <= s.rho * s.model.L * std::pow(step, q - 1.0)) || !(theta_y < theta_x)) {
      ++audit.inexact_violations;
    }
    audit.max_j = std::max(audit.max_j, s.j);
    ++audit.j_hist[s.j];
  };
  const auto t0 = Clock::now();
  AuditedRun out;
  out.report = solve(built.problem, built.x0, spec.solver, observer);
  out.report.certificates = certify(built.problem, out.report.x_final, spec.solver);
  out.seconds = seconds_since(t0);
  ++audit.runs;
  return out;
}

int xnz_of(const SolveReport& r) { return count_nonzeros(r.x_final); }

const Certificate* find_cert(const SolveReport& r, CertificateKind kind) {
  for (const auto& c : r.certificates)
    if (c.kind == kind) return &c;
  return nullptr;
}

void colon_cancer(int id, double lambda, double F_ref, double F_tol, bool full_table_row) {
  const auto path = find_colon_cancer(QREG_SOURCE_DIR);
  if (!path) {
    record(id, false, "colon-cancer dataset not found (set QREG_COLON_CANCER)", true);
    return;
  }
  const auto run = run_audited(colon_cancer_spec(*path, lambda, 2.7));
  const auto& r = run.report;
  bool ok = r.status == SolveStatus::Converged && std::abs(r.F_final - F_ref) <= F_tol &&
            r.resid_final <= 1e-6;
  if (full_table_row) {
    ok = ok && std::abs(xnz_of(r) - 30) <= 2 && r.iterations() <= 60 && run.seconds <= 60.0;
  }
  record(id, ok,
         std::string(to_string(r.status)) + " F=" + fmt("%.6e", r.F_final) +
             " resid=" + fmt("%.2e", r.resid_final) + " xnz=" + std::to_string(xnz_of(r)) +
             " iter=" + std::to_string(r.iterations()) + " time=" + fmt("%.1fs", run.seconds));
}

void rate_ordering() {
  const auto t0 = Clock::now();
  std::vector<std::optional<double>> rates;
  std::string detail;
  for (double q : default_q_list("rate_sweep")) {
    const auto run = run_audited(rate_sweep_spec(q));
    rates.push_back(run.report.rate_estimate);
    detail += "q=" + fmt("%g", q) + ":" +
              (run.report.rate_estimate ? fmt("%.3f", *run.report.rate_estimate) : "n/a") + " ";
  }
  const double secs = seconds_since(t0);
  bool ok = secs <= 120.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!rates[i]) ok = false;
    else if (i > 0 && rates[i - 1] && !(*rates[i] > *rates[i - 1])) ok = false;
  }
  ok = ok && rates.back() && *rates.back() >= 1.5;
  record(3, ok, detail + "time=" + fmt("%.1fs", secs));
}

void student_t_desk() {
  bool ok = true;
  int max_iter = 0;
  double min_h = kInf;
  std::string failures;
  for (double d : {20.0, 40.0})
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto run = run_audited(student_t_desk_spec(d, seed, 2.3));
      const auto& r = run.report;
      const Certificate* so = find_cert(r, CertificateKind::SecondOrder);
      const double h = so && so->evidence.count("H_min") ? so->evidence.at("H_min") : -kInf;
      const bool row = r.status == SolveStatus::Converged && r.iterations() <= 40 && so &&
                       so->passed && h > 0.0;
      max_iter = std::max(max_iter, r.iterations());
      min_h = std::min(min_h, h);
      if (!row) {
        failures += " d" + fmt("%g", d) + "/seed" + std::to_string(seed) + ":" + to_string(r.status);
      }
      ok = ok && row;
    }
  record(7, ok,
         "6 runs, max iter=" + std::to_string(max_iter) + ", min H_min=" + fmt("%.3e", min_h) +
             failures);
}

std::vector<SolveReport> mvsk_reports;

void mvsk_desk() {
  bool ok = true;
  int max_iter = 0;
  double max_resid = 0.0, max_dev = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto run = run_audited(mvsk_desk_spec(seed, 2.3));
    const auto& r = run.report;
    const double dev =
        std::max(std::abs(r.x_final.sum() - 1.0), std::max(0.0, -r.x_final.minCoeff()));
    const bool row = r.status == SolveStatus::Converged && r.x_final.size() == 50 && dev <= 1e-12 &&
                     r.resid_final <= 1e-5 && r.iterations() <= 80;
    max_iter = std::max(max_iter, r.iterations());
    max_resid = std::max(max_resid, r.resid_final);
    max_dev = std::max(max_dev, dev);
    ok = ok && row;
    mvsk_reports.push_back(r);
  }
  record(8, ok,
         "3 runs, max iter=" + std::to_string(max_iter) + ", max resid=" + fmt("%.2e", max_resid) +
             ", simplex deviation=" + fmt("%.1e", max_dev));
}

void extra_runs() {
  // Additional runs so the audits cover at least 20 solves across families.
  RunSpec tiny;
  tiny.problem.data = std::string(QREG_SOURCE_DIR) + "/data/tiny.libsvm";
  tiny.problem.lambda = 1e-2;
  for (double q : {2.0, 2.3, 2.7, 3.0}) {
    tiny.solver.q = q;
    run_audited(tiny);
  }
  RunSpec gen;
  gen.problem.generator = true;
  gen.problem.lambda = 1e-3;
  gen.problem.logistic = LogisticParams{100, 300, 8, 0.5, 0};
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    gen.seed = seed;
    gen.solver.q = 2.5;
    run_audited(gen);
  }
  RunSpec prices;
  prices.problem.family = Family::Mvsk;
  prices.problem.data = std::string(QREG_SOURCE_DIR) + "/data/prices_synthetic.csv";
  prices.solver.q = 2.3;
  prices.solver.eps = 4e-6;
  run_audited(prices);
}

// ---------------------------------------------------------------------------
// Oracle equivalence

Vector brute_force_simplex(const Vector& z) {
  const Index n = z.size();
  Vector best;
  double best_d = kInf;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    int k = 0;
    for (Index i = 0; i < n; ++i)
      if (mask & (1u << i)) sum += z[i], ++k;
    const double shift = (sum - 1.0) / k;
    Vector x = Vector::Zero(n);
    bool feasible = true;
    for (Index i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      x[i] = z[i] - shift;
      if (x[i] < 0.0) feasible = false;
    }
    if (!feasible) continue;
    const double d = (x - z).squaredNorm();
    if (d < best_d) best_d = d, best = x;
  }
  return best;
}

Vector normal_vector(Rng& rng, Index n, double scale) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

double fd_error(const SmoothOracle& f, const Vector& x, Rng& rng) {
  const double h = 1e-6;
  Vector g(x.size()), xp = x, xm = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f.value(xp) - f.value(xm)) / (2.0 * h);
    xp[i] = xm[i] = x[i];
  }
  const Vector v = normal_vector(rng, x.size(), 1.0);
  const double hv = 1e-5;
  const Vector Hv = (f.gradient(x + hv * v) - f.gradient(x - hv * v)) / (2.0 * hv);
  const Vector grad = f.gradient(x);
  return std::max((grad - g).norm() / std::max(1.0, g.norm()),
                  (f.hessian(x)->apply(v) - Hv).norm() / std::max(1.0, Hv.norm()));
}

void oracle_equivalence() {
  Rng rng(2024);
  double proj_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vector z = normal_vector(rng, 5, 1.5);
    proj_err = std::max(proj_err, (project_simplex(z) - brute_force_simplex(z)).cwiseAbs().maxCoeff());
  }

  // Gradient tolerance 1e-6 (1e-5 for the Student's t loss, whose curvature
  // changes quickly), both relative.
  double fd_logistic = 0.0, fd_student = 0.0, fd_mvsk = 0.0;
  const auto li = gen_logistic_instance(LogisticParams{30, 12, 4, 0.5, 1});
  const auto lp = logistic_oracle(li.A, li.b, 0.1);
  StudentTParams sp;
  sp.n = 64;
  sp.seed = 3;
  const auto sp_inst = gen_student_t_instance(sp);
  const auto stp = sp_inst.problem();
  const auto mp = mvsk_oracle(gen_synthetic_moments(SyntheticReturnsParams{5, 40, 4}), {0.29, 0.21, 0.4, 0.1});
  for (int t = 0; t < 20; ++t) {
    fd_logistic = std::max(fd_logistic, fd_error(*lp.f, normal_vector(rng, 12, 1.0), rng));
    fd_student = std::max(fd_student, fd_error(*stp.f, normal_vector(rng, 64, 1.0), rng));
    Vector w(5);
    for (Index i = 0; i < 5; ++i) w[i] = -std::log(1.0 - rng.uniform());
    fd_mvsk = std::max(fd_mvsk, fd_error(*mp.f, w / w.sum(), rng));
  }

  double fbe_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto& p = t % 2 ? lp : stp;
    const Vector x = normal_vector(rng, p.dim(), 0.3);
    const auto m = build_model(p, x, 0.1 + 2.0 * rng.uniform(), 2.0 + rng.uniform());
    const Vector y = x + normal_vector(rng, p.dim(), 0.2);
    const double gamma = 0.05 + 0.5 * rng.uniform();
    const Vector grad = model_grad(m, y);
    const double envelope = model_value(m, y) - 0.5 * gamma * grad.squaredNorm() +
                            moreau_envelope(*p.g, gamma, y - gamma * grad);
    const double direct = fbe_value(m, *p.g, gamma, y);
    fbe_err = std::max(fbe_err, std::abs(direct - envelope) / std::max(1.0, std::abs(direct)));
  }

  const bool ok = proj_err <= 1e-10 && fd_logistic <= 1e-6 && fd_mvsk <= 1e-6 &&
                  fd_student <= 1e-5 && fbe_err <= 1e-12;
  record(9, ok,
         "projection " + fmt("%.1e", proj_err) + ", fd logistic " + fmt("%.1e", fd_logistic) +
             " student_t " + fmt("%.1e", fd_student) + " mvsk " + fmt("%.1e", fd_mvsk) +
             ", fbe " + fmt("%.1e", fbe_err));
}

void determinism() {
  const auto strip = [](std::vector<IterationTrace> t) {
    for (auto& r : t) r.wall_ms = 0.0;
    return t;
  };
  bool ok = true;
  int compared = 0;
  const std::vector<RunSpec> specs{student_t_desk_spec(20.0, 1, 2.3), mvsk_desk_spec(1, 2.3),
                                   rate_sweep_spec(2.5)};
  for (const auto& spec : specs) {
    const auto a = execute(spec), b = execute(spec);
    ok = ok && strip(a.traces) == strip(b.traces) && a.x_final == b.x_final &&
         a.certificates == b.certificates;
    ++compared;
  }
  // Against the audited run of the same spec earlier in this process.
  if (!mvsk_reports.empty()) {
    ok = ok && strip(execute(mvsk_desk_spec(1, 2.3)).traces) == strip(mvsk_reports[0].traces);
  }
  record(10, ok, std::to_string(compared) + " specs run twice, traces identical excluding wall_ms");
}

}  // namespace

int main() {
  const char* names[] = {"",
                         "colon-cancer lambda=1e-4",
                         "colon-cancer lambda=1e-6",
                         "rate ordering in q",
                         "descent invariant",
                         "backtrack bound",
                         "inexactness audit",
                         "Student's t desk",
                         "MVSK desk",
                         "oracle equivalence",
                         "determinism"};
  try {
    colon_cancer(1, 1e-4, 3.231e-3, 2e-5, true);
    colon_cancer(2, 1e-6, 5.106e-5, 2e-6, false);
    rate_ordering();
    student_t_desk();
    mvsk_desk();
    extra_runs();

    record(4, audit.runs >= 20 && audit.descent_violations == 0,
           std::to_string(audit.descent_violations) + " violations over " +
               std::to_string(audit.accepted) + " steps in " + std::to_string(audit.runs) + " runs");
    std::string hist;
    for (const auto& [j, n] : audit.j_hist) hist += " j=" + std::to_string(j) + ":" + std::to_string(n);
    record(5, audit.max_j <= 60, "max j_k=" + std::to_string(audit.max_j) + ", histogram" + hist);
    record(6, audit.accepted > 0 && audit.inexact_violations == 0,
           std::to_string(audit.inexact_violations) + " violations over " +
               std::to_string(audit.accepted) + " accepted inner results");

    oracle_equivalence();
    determinism();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }

  bool all = true, only_data = true;
  for (int id = 1; id <= 10; ++id) {
    const auto it = outcomes.find(id);
    const Outcome o = it == outcomes.end() ? Outcome{false, false, "not run"} : it->second;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, names[id], o.detail.c_str());
    all = all && o.pass;
    if (!o.pass && !o.needs_data) only_data = false;
  }
  std::fflush(stdout);
  if (all) return 0;
  return only_data ? 77 : 1;
}
