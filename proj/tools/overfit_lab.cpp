// overfit_lab: fit interpolators, evaluate risks, run sweeps and invariant suites.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
// 3 solver non-convergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "overfit_lab/overfit_lab.hpp"

namespace ol = overfit_lab;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNonConverged = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    T v{};
    try {
      if constexpr (std::is_same_v<T, double>) {
        v = std::stod(item, &used);
      } else {
        if (item.find('-') != std::string::npos) throw std::invalid_argument(item);
        v = static_cast<T>(std::stoull(item, &used));
      }
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

ol::NoiseModel parse_noise(const std::string& spec) {
  const std::string prefix = "gaussian:";
  if (spec.rfind(prefix, 0) != 0) throw UsageError("noise must be gaussian:<sigma>, got '" + spec + "'");
  std::size_t used = 0;
  double sigma = 0.0;
  try {
    sigma = std::stod(spec.substr(prefix.size()), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != spec.size() - prefix.size()) throw UsageError("bad noise sigma in '" + spec + "'");
  try {
    return ol::NoiseModel::gaussian(sigma);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// zero, or csv:<path> read as a dataset and joined by the linear spline.
ol::PiecewiseLinear parse_target(const std::string& spec) {
  if (spec == "zero") return ol::PiecewiseLinear::constant(0.0);
  const std::string prefix = "csv:";
  if (spec.rfind(prefix, 0) != 0) throw UsageError("target must be zero or csv:<path>, got '" + spec + "'");
  const auto data = ol::load_dataset_csv(spec.substr(prefix.size()));
  if (data.size() == 1) return ol::PiecewiseLinear::constant(data.y()[0]);
  return ol::linear_spline(data);
}

// A predictor from a function JSON file, or a dataset CSV fitted with `method`.
ol::PiecewiseLinear load_predictor(const std::string& path, ol::Method method) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  if (std::filesystem::path(path).extension() == ".json") {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw UsageError(path + ": " + e.what());
    }
    return ol::pwl_from_json(j.contains("function") ? j["function"] : j);
  }
  return ol::fit(ol::parse_dataset_csv(in), method).function;
}

void log_config(const std::string& command, const json& cfg) {
  std::cerr << "[overfit_lab] " << command << ' ' << cfg.dump() << '\n';
}

// Writes to `path`, or to stdout when path is empty or "-".
template <class F>
void emit(const std::string& path, F&& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  writer(out);
}

std::string summary_path(const std::string& records) {
  std::filesystem::path p(records);
  return (p.parent_path() / (p.stem().string() + "_summary" + p.extension().string())).string();
}

struct Flags {
  std::string input, output, svg, summary;
  std::string method = "minnorm";
  std::string design = "iid";
  std::string target = "zero";
  std::string noise = "gaussian:1";
  std::string n;  // per-command default
  std::string p = "2";
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::string suite;
  bool planted = false;
};

int cmd_interpolate(const Flags& fl) {
  const auto method = ol::parse_method(fl.method);
  log_config("interpolate", {{"input", fl.input}, {"method", fl.method}, {"output", fl.output}, {"svg", fl.svg}});
  const auto data = ol::load_dataset_csv(fl.input);
  const auto fitted = ol::fit(data, method);
  json out{{"method", fl.method},   {"converged", fitted.converged}, {"cost", fitted.cost},
           {"n", data.size()},      {"kinks", fitted.function.kink_count()},
           {"function", ol::to_json(fitted.function)}};
  if (method == ol::Method::MinNorm) out["overshoot_intervals"] = ol::overshoot_intervals(data, fitted.function);
  emit(fl.output, [&](std::ostream& os) { os << out.dump(2) << '\n'; });
  if (!fl.svg.empty()) {
    ol::SvgOptions opts;
    opts.title = fl.method + " interpolator, n = " + std::to_string(data.size());
    opts.shade_envelope = method == ol::Method::MinNorm;
    emit(fl.svg, [&](std::ostream& os) { ol::write_svg(os, data, fitted.function, opts); });
  }
  if (!fitted.converged) {
    std::cerr << "[overfit_lab] solver did not converge\n";
    return kNonConverged;
  }
  return kOk;
}

int cmd_risk(const Flags& fl) {
  const auto target = parse_target(fl.target);
  const auto noise = parse_noise(fl.noise);
  const auto ps = parse_list<double>(fl.p, "p");
  for (double p : ps) {
    if (!(p >= 1.0)) throw UsageError("every p must be >= 1");
  }
  log_config("risk", {{"input", fl.input}, {"method", fl.method}, {"target", fl.target}, {"noise", noise.describe()},
                      {"p", ps}});
  const auto f = load_predictor(fl.input, ol::parse_method(fl.method));
  emit(fl.output, [&](std::ostream& os) {
    os << ol::kRiskCsvHeader << '\n';
    for (double p : ps) ol::write_csv_row(os, ol::evaluate_risk(f, target, noise, p));
  });
  return kOk;
}

int cmd_sweep(const Flags& fl) {
  ol::ExperimentConfig cfg;
  cfg.design = ol::parse_design(fl.design);
  cfg.target = parse_target(fl.target);
  cfg.noise = parse_noise(fl.noise);
  cfg.n_values = parse_list<std::size_t>(fl.n.empty() ? "200" : fl.n, "n");
  cfg.p_values = parse_list<double>(fl.p, "p");
  cfg.trials = fl.trials;
  cfg.seed = fl.seed;
  cfg.interpolator = ol::parse_method(fl.method);
  cfg.validate();
  log_config("sweep", {{"design", ol::to_string(cfg.design)},
                       {"target", fl.target},
                       {"noise", cfg.noise.describe()},
                       {"n", cfg.n_values},
                       {"p", cfg.p_values},
                       {"trials", cfg.trials},
                       {"seed", cfg.seed},
                       {"method", ol::to_string(cfg.interpolator)},
                       {"threads", ol::worker_count()}});

  const auto sr = ol::run_sweep(cfg);
  emit(fl.output, [&](std::ostream& os) { ol::write_sweep_csv(os, sr); });
  std::string summary = fl.summary;
  if (summary.empty() && !fl.output.empty() && fl.output != "-") summary = summary_path(fl.output);
  if (!summary.empty()) emit(summary, [&](std::ostream& os) { ol::write_summary_csv(os, sr); });

  std::ostream& stats = (fl.output.empty() || fl.output == "-") ? std::cerr : std::cout;
  std::size_t nonconverged = 0;
  for (const auto& s : sr.summaries) nonconverged += s.nonconverged;
  for (double p : cfg.p_values) {
    if (cfg.noise.moment(p) > 0.0) {
      const auto t = ol::tempered_statistic(sr, p);
      stats << "tempered p=" << p << " ratios";
      for (double r : t.ratio) stats << ' ' << r;
      stats << " max_step_factor=" << t.max_step_factor << '\n';
    }
    if (p >= 2.0) {
      const auto g = ol::catastrophic_statistic(sr, p);
      stats << "growth p=" << p << " medians";
      for (double m : g.median) stats << ' ' << m;
      stats << " loglog_slope=" << g.slope << '\n';
    }
    for (auto n : cfg.n_values) {
      stats << "heavy_tail p=" << p << " n=" << n << " max_to_sum=" << sr.summary(n, p).max_to_sum << '\n';
    }
  }
  if (nonconverged > 0) {
    std::cerr << "[overfit_lab] " << nonconverged << " trial(s) did not converge\n";
    return kNonConverged;
  }
  return kOk;
}

int cmd_verify(const Flags& fl) {
  const auto& names = ol::verify_suites();
  if (std::find(names.begin(), names.end(), fl.suite) == names.end()) throw UsageError("unknown suite '" + fl.suite + "'");
  log_config("verify", {{"suite", fl.suite}, {"seed", fl.seed}});
  const auto rep = ol::run_verify_suite(fl.suite, fl.seed);
  emit(fl.output, [&](std::ostream& os) { os << rep.to_json().dump(2) << '\n'; });
  return rep.passed() ? kOk : kVerifyFailed;
}

int cmd_events(const Flags& fl) {
  const auto ns = parse_list<std::size_t>(fl.n.empty() ? "600" : fl.n, "n");
  const auto ps = parse_list<double>(fl.p, "p");
  if (ns.size() != 1) throw UsageError("events takes a single n");
  for (double p : ps) {
    if (!(p >= 1.0)) throw UsageError("every p must be >= 1");
  }
  if (fl.trials < 1) throw UsageError("trials must be >= 1");
  log_config("events", {{"n", ns[0]}, {"p", ps}, {"trials", fl.trials}, {"seed", fl.seed}, {"planted", fl.planted}});
  const auto st = fl.planted ? ol::planted_lower_bound_study(fl.seed, fl.trials, ns[0], ps)
                             : ol::lower_bound_study(fl.seed, fl.trials, ns[0], ps);
  emit(fl.output, [&](std::ostream& os) { os << st.report.to_json().dump(2) << '\n'; });
  return st.report.passed() ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Min-norm interpolation and overfitting experiments"};
  app.require_subcommand(1);
  Flags fl;

  auto* interp = app.add_subcommand("interpolate", "fit an interpolator to a dataset CSV");
  interp->add_option("--input", fl.input, "dataset CSV (x,y)")->required();
  interp->add_option("--method", fl.method, "spline | extspline | minnorm")->capture_default_str();
  interp->add_option("--output", fl.output, "function JSON (default stdout)");
  interp->add_option("--svg", fl.svg, "SVG plot path");

  auto* risk = app.add_subcommand("risk", "reconstruction and population risk of a predictor");
  risk->add_option("--input", fl.input, "function JSON, or dataset CSV fitted with --method")->required();
  risk->add_option("--method", fl.method, "interpolator for CSV input")->capture_default_str();
  risk->add_option("--target", fl.target, "zero | csv:<path>")->capture_default_str();
  risk->add_option("--noise", fl.noise, "gaussian:<sigma>")->capture_default_str();
  risk->add_option("--p", fl.p, "comma list of p")->capture_default_str();
  risk->add_option("--output", fl.output, "risk CSV (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over n, p and trials");
  sweep->add_option("--design", fl.design, "iid | grid")->capture_default_str();
  sweep->add_option("--target", fl.target, "zero | csv:<path>")->capture_default_str();
  sweep->add_option("--noise", fl.noise, "gaussian:<sigma>")->capture_default_str();
  sweep->add_option("--n", fl.n, "comma list of sample sizes (default 200)");
  sweep->add_option("--p", fl.p, "comma list of p")->capture_default_str();
  sweep->add_option("--trials", fl.trials, "trials per n")->capture_default_str();
  sweep->add_option("--seed", fl.seed, "master seed")->capture_default_str();
  sweep->add_option("--method", fl.method, "spline | extspline | minnorm")->capture_default_str();
  sweep->add_option("--output", fl.output, "records CSV (default stdout)");
  sweep->add_option("--summary", fl.summary, "summary CSV (default <output>_summary.csv)");

  auto* verify = app.add_subcommand("verify", "run an invariant suite");
  verify->add_option("--suite", fl.suite, "oracle | envelope | spike | slopes | gaps | moments | inequality | gamma")
      ->required();
  verify->add_option("--seed", fl.seed, "master seed")->capture_default_str();
  verify->add_option("--output", fl.output, "report JSON (default stdout)");

  auto* events = app.add_subcommand("events", "lower-bound block events over seeded trials");
  events->add_option("--n", fl.n, "sample size (default 600)");
  events->add_option("--p", fl.p, "comma list of p")->capture_default_str();
  events->add_option("--trials", fl.trials, "trials")->capture_default_str();
  events->add_option("--seed", fl.seed, "master seed")->capture_default_str();
  events->add_flag("--planted", fl.planted, "condition every block's noise on the pattern");
  events->add_option("--output", fl.output, "report JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (interp->parsed()) return cmd_interpolate(fl);
    if (risk->parsed()) return cmd_risk(fl);
    if (sweep->parsed()) return cmd_sweep(fl);
    if (verify->parsed()) return cmd_verify(fl);
    if (events->parsed()) return cmd_events(fl);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
