// Acceptance run: one PASS/FAIL line per criterion, followed by INFO lines.
// Exits 0 when every failing criterion is listed in --allow-fail.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "overfit_lab/overfit_lab.hpp"

using namespace overfit_lab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string series(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt("%.4g", v[i]);
  return s + "]";
}

std::string first_failure(const VerifyReport& r) {
  if (r.failures.empty()) return "";
  return "; first failure: " + r.failures.front().check + " " + r.failures.front().instance.dump().substr(0, 300);
}

ExperimentConfig sweep_config(std::uint64_t seed, Design design, Method method, std::vector<double> ps) {
  ExperimentConfig cfg;
  cfg.design = design;
  cfg.interpolator = method;
  cfg.n_values = {200, 2000, 20000};
  cfg.p_values = std::move(ps);
  cfg.trials = 50;
  cfg.seed = seed;
  return cfg;
}

std::size_t nonconverged(const SweepResult& sr) {
  std::size_t k = 0;
  for (const auto& s : sr.summaries) k += s.nonconverged;
  return k;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::uint64_t seed = 20240601;
  std::vector<int> allow;
  std::string golden, write_golden;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--allow-fail", allow, "criteria whose failure does not affect the exit code")->delimiter(',');
  app.add_option("--golden", golden, "summary CSV to compare the sweeps against");
  app.add_option("--write-golden", write_golden, "write the sweep summaries here");
  CLI11_PARSE(app, argc, argv);

  std::vector<std::pair<int, Outcome>> results;
  std::vector<std::string> info;
  auto record = [&](int id, const std::string& name, Outcome o) {
    std::cout << "CRITERION " << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail
              << std::endl;
    results.emplace_back(id, o);
  };

  // 1. Oracle equivalence.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = verify_oracle(seed, 100, {2, 3, 4});
    const double dt = seconds_since(t0);
    record(1, "oracle equivalence",
           {r.passed() && dt <= 120.0,
            "100 datasets, max relative cost gap " + fmt("%.2e", r.details["max_relative_cost_gap"].get<double>()) +
                ", max sup distance " + fmt("%.2e", r.details["max_sup_distance"].get<double>()) + ", " +
                std::to_string(r.failed) + " failed checks, " + fmt("%.1f", dt) + " s" + first_failure(r)});
  }

  // 2. Structural invariants.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = verify_structure(seed, 200, {5, 20, 100}, StructureChecks{}, "structure");
    const double dt = seconds_since(t0);
    record(2, "structural invariants",
           {r.passed() && dt <= 120.0, "200 datasets, " + std::to_string(r.checks) + " checks, " +
                                           std::to_string(r.failed) + " violations, " + fmt("%.1f", dt) + " s" +
                                           first_failure(r)});
  }

  // 3. Exact spike.
  {
    const auto r = verify_spike(seed, 50, 1e-8);
    record(3, "exact spike",
           {r.passed(), "50 configurations, max shape error " +
                            fmt("%.2e", r.details["max_shape_error"].get<double>()) + ", max kink offset " +
                            fmt("%.2e", r.details["max_kink_error"].get<double>()) + first_failure(r)});
  }

  // 4-7. Sweeps.
  auto t0 = std::chrono::steady_clock::now();
  const auto iid = run_sweep(sweep_config(seed, Design::IidUniform, Method::MinNorm, {1.0, 1.5, 2.0, 3.0}));
  const double iid_time = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto grid = run_sweep(sweep_config(seed, Design::Grid, Method::MinNorm, {1.0, 2.0, 3.0}));
  const double grid_time = seconds_since(t0);
  const auto spline = run_sweep(sweep_config(seed, Design::IidUniform, Method::Spline, {2.0}));
  const auto ext = run_sweep(sweep_config(seed, Design::IidUniform, Method::ExtSpline, {1.0, 2.0, 3.0}));

  {
    Outcome o{iid_time <= 900.0 && nonconverged(iid) == 0, ""};
    for (double p : {1.0, 1.5}) {
      const auto t = tempered_statistic(iid, p);
      const double hi = 3136.0 / (2.0 - p);
      const bool ok = t.within(1.0, hi) && t.max_step_factor < 2.0;
      o.pass = o.pass && ok;
      o.detail += "p=" + fmt("%g", p) + " ratios " + series(t.ratio) + " step " + fmt("%.3f", t.max_step_factor) +
                  " (bound " + fmt("%.0f", hi) + "); ";
    }
    o.detail += std::to_string(nonconverged(iid)) + " non-converged, sweep " + fmt("%.1f", iid_time) + " s";
    record(4, "tempered p<2 (iid, min-norm)", o);
  }
  {
    Outcome o{true, ""};
    for (double p : {2.0, 3.0}) {
      const auto g = catastrophic_statistic(iid, p);
      const double factor = g.median[2] / g.median[1];
      const bool ok = g.slope >= 0.2 && factor >= 2.0;
      o.pass = o.pass && ok;
      o.detail += "p=" + fmt("%g", p) + " medians " + series(g.median) + " slope " + fmt("%.3f", g.slope) +
                  " factor " + fmt("%.2f", factor) + (ok ? "" : " [below 0.2 / 2x]") + "; ";
    }
    record(5, "catastrophic p>=2 (iid, min-norm)", o);
  }
  {
    Outcome o{grid_time <= 600.0 && nonconverged(grid) == 0, ""};
    for (double p : {1.0, 2.0, 3.0}) {
      const auto t = tempered_statistic(grid, p);
      const double hi = std::pow(20.0, p) + std::pow(10.0, p) + std::pow(2.0, p);
      const bool ok = t.within(0.0, hi) && t.max_step_factor < 2.0;
      o.pass = o.pass && ok;
      o.detail += "p=" + fmt("%g", p) + " ratios " + series(t.ratio) + " step " + fmt("%.3f", t.max_step_factor) +
                  " (bound " + fmt("%.0f", hi) + "); ";
    }
    o.detail += "sweep " + fmt("%.1f", grid_time) + " s";
    record(6, "grid tempered (min-norm)", o);
  }
  {
    const auto t = tempered_statistic(spline, 2.0);
    record(7, "spline tempered p=2", {t.within(0.0, 44.0), "ratios " + series(t.ratio) + " (bound 44)"});
  }

  // 8. Moments.
  {
    const auto t = std::chrono::steady_clock::now();
    const auto r = verify_moments(seed, 10000000, 1000000);
    const double dt = seconds_since(t);
    std::string d;
    for (const auto& m : r.details["inverse_max"]) {
      d += "E[1/max^" + fmt("%g", m["p"].get<double>()) + "] MC " + fmt("%.5f", m["monte_carlo"].get<double>()) +
           " +- " + fmt("%.5f", m["std_error"].get<double>()) + " vs " + fmt("%.5f", m["exact"].get<double>()) +
           " (bound " + fmt("%.4f", m["bound"].get<double>()) + "); ";
    }
    const auto& ig = r.details["inverse_gamma"];
    d += "E[1/Gamma(9)^2] MC " + fmt("%.6f", ig["monte_carlo"].get<double>()) + " +- " +
         fmt("%.6f", ig["std_error"].get<double>()) + " vs " + fmt("%.6f", ig["exact"].get<double>()) + "; ";
    d += std::to_string(r.checks) + " checks, " + std::to_string(r.failed) + " failed, " + fmt("%.1f", dt) + " s";
    record(8, "moment suite", {r.passed() && dt <= 60.0, d + first_failure(r)});
  }

  // 9. Gap distribution.
  {
    const auto t = std::chrono::steady_clock::now();
    const auto r = verify_gaps(seed, 10000, 100, 0.01);
    const double dt = seconds_since(t);
    record(9, "gap distribution",
           {r.passed() && dt <= 60.0,
            "iid KS D=" + fmt("%.4f", r.details["iid"]["statistic"].get<double>()) +
                " p=" + fmt("%.3f", r.details["iid"]["p_value"].get<double>()) +
                "; grid KS D=" + fmt("%.4f", r.details["grid"]["statistic"].get<double>()) +
                " p=" + fmt("%.2e", r.details["grid"]["p_value"].get<double>()) + ", " + fmt("%.1f", dt) + " s"});
  }

  // 10. Lower-bound machinery.
  {
    const auto t = std::chrono::steady_clock::now();
    const auto st = lower_bound_study(seed, 1000, 600);
    const double dt = seconds_since(t);
    record(10, "lower-bound machinery",
           {st.report.passed() && dt <= 300.0,
            std::to_string(st.events) + " firing blocks of " + std::to_string(st.blocks) + ", c0 " +
                fmt("%.3e", st.c0_empirical) + " vs " + fmt("%.3e", st.c0_reference) + " +- " +
                fmt("%.2e", st.c0_std_error) + ", " + std::to_string(st.report.failed) + " failed checks, " +
                fmt("%.1f", dt) + " s" + first_failure(st.report)});
    const auto planted = planted_lower_bound_study(seed, 200, 600);
    info.push_back("planted blocks: " + std::to_string(planted.events) + " of " + std::to_string(planted.blocks) +
                   " fire (rate " + fmt("%.4f", planted.c0_empirical) + ", expected 1/3), " +
                   std::to_string(planted.report.checks) + " checks, " + std::to_string(planted.report.failed) +
                   " failed" + first_failure(planted.report));
  }

  // 11. Symmetric-noise inequality.
  {
    const auto r = verify_inequality(seed, 500, 100000, 1e-9);
    record(11, "symmetric-noise inequality",
           {r.passed(), "500 instances, min L_p - R_p " + fmt("%.3e", r.details["min_L_minus_R"].get<double>()) +
                            ", " + std::to_string(r.failed) + " failed checks" + first_failure(r)});
  }

  for (const auto* sr : {&iid, &ext}) {
    for (double p : sr->config.p_values) {
      std::string line = std::string("heavy tail ") + to_string(sr->config.interpolator) + " p=" + fmt("%g", p) +
                         " max/sum of L_p over trials:";
      for (auto n : sr->config.n_values) line += " n=" + std::to_string(n) + " " + fmt("%.3f", sr->summary(n, p).max_to_sum);
      info.push_back(line);
    }
  }

  std::ostringstream summaries;
  for (const auto* sr : {&iid, &grid, &spline, &ext}) {
    for (const auto& s : sr->summaries) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "%s,%s,%zu,%g,%.17g,%.17g\n", to_string(sr->config.design),
                    to_string(sr->config.interpolator), s.n, s.p, s.median, s.ratio_to_bayes);
      summaries << buf;
    }
  }
  if (!write_golden.empty()) {
    std::ofstream out(write_golden);
    out << "design,method,n,p,median_L,ratio_to_bayes\n" << summaries.str();
    info.push_back("wrote sweep summaries to " + write_golden);
  }
  if (!golden.empty()) {
    std::ifstream in(golden);
    std::string header, line;
    std::getline(in, header);
    std::istringstream now(summaries.str());
    std::string mine;
    std::size_t rows = 0, mismatched = 0;
    while (std::getline(in, line)) {
      ++rows;
      if (!std::getline(now, mine)) {
        ++mismatched;
        continue;
      }
      // Compare the numeric columns with a relative tolerance.
      auto fields = [](const std::string& s) {
        std::vector<std::string> f;
        std::stringstream ss(s);
        std::string c;
        while (std::getline(ss, c, ',')) f.push_back(c);
        return f;
      };
      const auto a = fields(line), b = fields(mine);
      bool same = a.size() == b.size();
      for (std::size_t k = 0; same && k < a.size(); ++k) {
        if (k < 2) {
          same = a[k] == b[k];
        } else {
          const double x = std::stod(a[k]), y = std::stod(b[k]);
          same = std::abs(x - y) <= 1e-9 * std::max(std::abs(x), 1e-300);
        }
      }
      mismatched += same ? 0 : 1;
    }
    info.push_back("golden sweep summaries: " + std::to_string(rows - mismatched) + " of " + std::to_string(rows) +
                   " rows reproduce within 1e-9 relative");
  }

  for (const auto& line : info) std::cout << "INFO " << line << '\n';

  const std::set<int> allowed(allow.begin(), allow.end());
  int unexpected = 0, passed = 0;
  for (const auto& [id, o] : results) {
    passed += o.pass ? 1 : 0;
    if (!o.pass && !allowed.count(id)) ++unexpected;
    if (o.pass && allowed.count(id)) std::cout << "NOTE criterion " << id << " passed although allowed to fail\n";
  }
  std::cout << "SUMMARY " << passed << " of " << results.size() << " criteria pass";
  if (!allowed.empty()) std::cout << "; failures allowed for " << CLI::detail::join(allow, ",");
  std::cout << std::endl;
  return unexpected == 0 ? 0 : 1;
}
