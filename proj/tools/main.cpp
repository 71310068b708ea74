#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "treedual/bessel.hpp"
#include "treedual/duality_lab.hpp"
#include "treedual/dual.hpp"
#include "treedual/market_tree.hpp"
#include "treedual/preferences.hpp"
#include "treedual/primal.hpp"

namespace {

using namespace treedual;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct LoadedScenario {
  MarketModel model;
  UtilityField utility;
};

LoadedScenario load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  MarketModel model = parse_scenario(text);
  UtilityField utility = UtilityField::from_scenario(text, model);
  return LoadedScenario{std::move(model), std::move(utility)};
}

std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0.0, hi = 0.0;
  int n = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' ||
      !(lo > 0.0) || !(hi > lo) || n < 2) {
    throw CLI::ValidationError("--grid expects lo:hi:n with 0 < lo < hi, n >= 2");
  }
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) {
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  }
  return g;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

std::string csv_num(double v) { return fmt(v, 12); }

// Writes rows either to the given file or to stdout.
class CsvSink {
 public:
  explicit CsvSink(const std::string& path, bool default_stdout) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw ScenarioError("cannot open output file " + path);
      out_ = &file_;
    } else if (default_stdout) {
      out_ = &std::cout;
    }
  }
  bool active() const { return out_ != nullptr; }
  void row(const std::string& line) {
    if (out_) *out_ << line << "\n";
  }
  void flush() {
    if (out_) out_->flush();
  }

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

void node_table_header(std::ostream& os, const MarketModel& m,
                       const std::vector<std::string>& extra) {
  os << std::setw(6) << "node" << std::setw(6) << "time" << std::setw(12)
     << "prob" << std::setw(10) << "dkappa";
  for (const auto& name : extra) os << std::setw(14) << name;
  (void)m;
  os << "\n";
}

int cmd_check_nupbr(const std::string& scenario_path, const std::string& csv,
                    double tol) {
  const auto sc = load(scenario_path);
  const auto report = check_nupbr(sc.model, tol);
  std::cout << "nupbr_holds = " << (report.holds ? "true" : "false") << "\n";
  std::cout << "eps_star = " << fmt(report.eps_star) << "\n";
  if (report.holds) {
    node_table_header(std::cout, sc.model, {"z"});
    for (int i = 0; i < sc.model.size(); ++i) {
      const Node& nd = sc.model.node(i);
      std::cout << std::setw(6) << nd.id << std::setw(6) << nd.time
                << std::setw(12) << fmt(nd.prob) << std::setw(10)
                << fmt(nd.dkappa) << std::setw(14)
                << fmt(report.witness->z[i]) << "\n";
    }
    CsvSink sink(csv, false);
    if (sink.active()) {
      sink.row("node_id,time,prob,dkappa,z");
      for (int i = 0; i < sc.model.size(); ++i) {
        const Node& nd = sc.model.node(i);
        sink.row(std::to_string(nd.id) + "," + std::to_string(nd.time) + "," +
                 csv_num(nd.prob) + "," + csv_num(nd.dkappa) + "," +
                 csv_num(report.witness->z[i]));
      }
    }
  }
  return report.holds ? kExitOk : kExitCheckFailed;
}

int cmd_solve_primal(const std::string& scenario_path, double x, double tol,
                     const std::string& csv) {
  const auto sc = load(scenario_path);
  const auto sol = solve_primal(sc.model, sc.utility, x, tol);
  std::cout << "u(" << fmt(x) << ") = " << fmt(sol.value, 9) << "\n";
  std::vector<std::string> cols = {"consumption", "wealth_pre", "wealth_post"};
  for (int k = 0; k < sc.model.num_assets(); ++k) {
    cols.push_back("strategy_" + std::to_string(k));
  }
  node_table_header(std::cout, sc.model, cols);
  for (int i = 0; i < sc.model.size(); ++i) {
    const Node& nd = sc.model.node(i);
    std::cout << std::setw(6) << nd.id << std::setw(6) << nd.time
              << std::setw(12) << fmt(nd.prob) << std::setw(10)
              << fmt(nd.dkappa) << std::setw(14) << fmt(sol.plan.rate[i])
              << std::setw(14) << fmt(sol.wealth.pre[i]) << std::setw(14)
              << fmt(sol.wealth.post[i]);
    for (int k = 0; k < sc.model.num_assets(); ++k) {
      std::cout << std::setw(14)
                << fmt(sc.model.is_terminal(i) ? 0.0 : sol.holdings(i, k));
    }
    std::cout << "\n";
  }
  CsvSink sink(csv, false);
  if (sink.active()) {
    std::string header = "node_id,time,prob,dkappa,consumption,wealth_pre,wealth_post";
    for (int k = 0; k < sc.model.num_assets(); ++k) {
      header += ",strategy_" + std::to_string(k);
    }
    sink.row(header);
    for (int i = 0; i < sc.model.size(); ++i) {
      const Node& nd = sc.model.node(i);
      std::string line = std::to_string(nd.id) + "," + std::to_string(nd.time) +
                         "," + csv_num(nd.prob) + "," + csv_num(nd.dkappa) +
                         "," + csv_num(sol.plan.rate[i]) + "," +
                         csv_num(sol.wealth.pre[i]) + "," +
                         csv_num(sol.wealth.post[i]);
      for (int k = 0; k < sc.model.num_assets(); ++k) {
        line += "," + csv_num(sc.model.is_terminal(i) ? 0.0 : sol.holdings(i, k));
      }
      sink.row(line);
    }
  }
  return kExitOk;
}

int cmd_solve_dual(const std::string& scenario_path, double y, double tol,
                   const std::string& csv) {
  const auto sc = load(scenario_path);
  const auto sol = solve_dual(sc.model, sc.utility, y, tol);
  std::cout << "v(" << fmt(y) << ") = " << fmt(sol.value, 9) << "\n";
  node_table_header(std::cout, sc.model, {"z", "Y"});
  for (int i = 0; i < sc.model.size(); ++i) {
    const Node& nd = sc.model.node(i);
    std::cout << std::setw(6) << nd.id << std::setw(6) << nd.time
              << std::setw(12) << fmt(nd.prob) << std::setw(10)
              << fmt(nd.dkappa) << std::setw(14) << fmt(sol.zhat[i])
              << std::setw(14) << fmt(sol.yhat[i]) << "\n";
  }
  CsvSink sink(csv, false);
  if (sink.active()) {
    sink.row("node_id,time,prob,dkappa,z,Y");
    for (int i = 0; i < sc.model.size(); ++i) {
      const Node& nd = sc.model.node(i);
      sink.row(std::to_string(nd.id) + "," + std::to_string(nd.time) + "," +
               csv_num(nd.prob) + "," + csv_num(nd.dkappa) + "," +
               csv_num(sol.zhat[i]) + "," + csv_num(sol.yhat[i]));
    }
  }
  return kExitOk;
}

int cmd_verify_duality(const std::string& scenario_path, double x,
                       const std::string& grid_spec, const std::string& report_path,
                       double tol) {
  const auto sc = load(scenario_path);
  const ValueFunctions vf(sc.model, sc.utility, tol);
  const auto rep = verify_dual_relations(vf, x);

  std::cout << "x = " << fmt(x) << ", y = u'(x) = " << fmt(rep.y, 9) << "\n";
  std::cout << "u(x) = " << fmt(rep.u_value, 9) << ", v(y) = "
            << fmt(rep.v_value, 9) << "\n";
  std::cout << std::setw(26) << "check" << std::setw(16) << "residual"
            << std::setw(14) << "tolerance" << std::setw(8) << "pass" << "\n";
  for (const auto& line : rep.checks) {
    std::cout << std::setw(26) << line.name << std::setw(16)
              << fmt(line.residual, 6) << std::setw(14) << fmt(line.tolerance)
              << std::setw(8) << (line.pass ? "yes" : "no") << "\n";
  }

  bool all_pass = rep.pass;
  std::optional<ConjugacyReport> conj;
  if (!grid_spec.empty()) {
    const auto grid = parse_grid(grid_spec);
    conj = verify_conjugacy(sc.model, sc.utility, grid, grid, 1e-4, tol);
    std::cout << std::setw(26) << "conjugacy-grid" << std::setw(16)
              << fmt(conj->max_residual, 6) << std::setw(14) << fmt(conj->tolerance)
              << std::setw(8) << (conj->pass ? "yes" : "no") << "\n";
    all_pass = all_pass && conj->pass;
  }

  CsvSink sink(report_path, false);
  if (sink.active()) {
    sink.row("check,x,y,value,residual,tolerance,pass");
    for (const auto& line : rep.checks) {
      sink.row(line.name + "," + csv_num(x) + "," + csv_num(rep.y) + "," +
               csv_num(line.value) + "," + csv_num(line.residual) + "," +
               csv_num(line.tolerance) + "," + (line.pass ? "1" : "0"));
    }
    if (conj) {
      sink.row("conjugacy-grid," + csv_num(x) + "," + csv_num(rep.y) + ",0," +
               csv_num(conj->max_residual) + "," + csv_num(conj->tolerance) +
               "," + (conj->pass ? "1" : "0"));
    }
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_sweep(const std::string& scenario_path, const std::string& axis,
              const std::string& grid_spec, const std::string& csv, double tol) {
  if (axis != "x" && axis != "y") {
    throw CLI::ValidationError("--axis must be x or y");
  }
  const auto sc = load(scenario_path);
  const auto grid = parse_grid(grid_spec);
  const auto nupbr = check_nupbr(sc.model);
  if (!nupbr.holds) {
    std::cerr << "sweep aborted: market admits unbounded profit\n";
    return kExitCheckFailed;
  }

  const int n = static_cast<int>(grid.size());
  std::vector<std::optional<double>> values(n);
  const bool primal_axis = axis == "x";
  const int workers = std::min(8u, std::max(1u, std::thread::hardware_concurrency()));
  auto worker = [&](int w) {
    for (int i = w; i < n; i += workers) {
      try {
        values[i] = primal_axis
                        ? solve_primal(sc.model, sc.utility, grid[i], tol, &nupbr).value
                        : solve_dual(sc.model, sc.utility, grid[i], tol, 0.0, &nupbr).value;
      } catch (const std::exception& e) {
        std::cerr << "solve failed at " << axis << " = " << grid[i] << ": "
                  << e.what() << "\n";
      }
    }
  };
  std::vector<std::future<void>> jobs;
  for (int w = 1; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, worker, w));
  }
  worker(0);
  for (auto& j : jobs) j.get();

  CsvSink sink(csv, true);
  sink.row("index,point,value,derivative,note");
  bool failed = false;
  std::vector<double> vals;
  for (int i = 0; i < n; ++i) {
    if (!values[i]) {
      failed = true;
      break;
    }
    vals.push_back(*values[i]);
  }
  // derivative column: central differences on the (nonuniform) grid
  auto derivative = [&](int i) {
    const int m = static_cast<int>(vals.size());
    if (m < 2) return 0.0;
    if (i == 0) return (vals[1] - vals[0]) / (grid[1] - grid[0]);
    if (i == m - 1) return (vals[m - 1] - vals[m - 2]) / (grid[m - 1] - grid[m - 2]);
    const double hl = grid[i] - grid[i - 1], hr = grid[i + 1] - grid[i];
    const double left = (vals[i] - vals[i - 1]) / hl;
    const double right = (vals[i + 1] - vals[i]) / hr;
    return (left * hr + right * hl) / (hl + hr);
  };
  for (size_t i = 0; i < vals.size(); ++i) {
    sink.row(std::to_string(i) + "," + csv_num(grid[i]) + "," +
             csv_num(vals[i]) + "," + csv_num(derivative(static_cast<int>(i))) +
             ",");
  }

  if (failed || vals.size() != static_cast<size_t>(n)) {
    sink.flush();
    std::cerr << "sweep incomplete: solver failure, partial output flushed\n";
    return kExitCheckFailed;
  }

  // Shape summary: u increasing concave over x, v decreasing convex over y.
  bool monotone = true, curved = true;
  for (int i = 1; i < n; ++i) {
    monotone = monotone && (primal_axis ? vals[i] > vals[i - 1] : vals[i] < vals[i - 1]);
  }
  for (int i = 1; i + 1 < n; ++i) {
    const double left = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
    const double right = (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i]);
    curved = curved && (primal_axis ? right < left + 1e-12 : right > left - 1e-12);
  }
  const std::string note = primal_axis
                               ? std::string("increasing=") + (monotone ? "1" : "0") +
                                     ";concave=" + (curved ? "1" : "0")
                               : std::string("decreasing=") + (monotone ? "1" : "0") +
                                     ";convex=" + (curved ? "1" : "0");
  sink.row("summary,,,," + note);
  sink.flush();
  return (monotone && curved) ? kExitOk : kExitCheckFailed;
}

int cmd_bessel(double t, std::int64_t paths, std::uint64_t seed,
               const std::string& sweep_spec, const std::string& csv) {
  std::vector<double> horizons;
  if (!sweep_spec.empty()) {
    std::istringstream in(sweep_spec);
    std::string item;
    while (std::getline(in, item, ',')) {
      horizons.push_back(std::stod(item));
    }
    if (horizons.empty()) throw CLI::ValidationError("--sweep expects t1,t2,...");
  } else {
    horizons.push_back(t);
  }

  CsvSink sink(csv, horizons.size() > 1);
  if (sink.active()) sink.row("t,paths,estimate,std_error,defect");
  for (double horizon : horizons) {
    const auto est = estimate_defect(horizon, paths, seed);
    if (horizons.size() == 1 && !sink.active()) {
      std::cout << "t = " << fmt(est.t) << ", paths = " << est.paths << "\n";
      std::cout << "estimate = " << fmt(est.estimate, 9) << "\n";
      std::cout << "std_error = " << fmt(est.std_error, 9) << "\n";
      std::cout << "defect = " << fmt(est.defect, 9) << "\n";
    }
    sink.row(csv_num(est.t) + "," + std::to_string(est.paths) + "," +
             csv_num(est.estimate) + "," + csv_num(est.std_error) + "," +
             csv_num(est.defect));
  }
  sink.flush();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "treedual: convex-duality toolkit for optimal consumption on finite "
      "event-tree markets"};
  app.require_subcommand(1);

  std::string scenario, csv, report_path, verify_grid, axis, sweep_spec;
  std::string sweep_grid = "0.25:4:25";
  double x = 1.0, y = 1.0, tol = 1e-8, t = 1.0;
  std::int64_t paths = 1000000;
  std::uint64_t seed = 1;

  auto* nupbr_cmd = app.add_subcommand(
      "check-nupbr",
      "Decide whether unbounded profits are impossible; prints eps_star and "
      "the witness deflator. CSV schema: node_id,time,prob,dkappa,z");
  nupbr_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  nupbr_cmd->add_option("--csv", csv, "write the witness table to this file");
  nupbr_cmd->add_option("--tol", tol, "solver tolerance")->capture_default_str();

  auto* primal_cmd = app.add_subcommand(
      "solve-primal",
      "Maximize expected utility of consumption from capital x. CSV schema: "
      "node_id,time,prob,dkappa,consumption,wealth_pre,wealth_post,strategy_k");
  primal_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  primal_cmd->add_option("--x", x, "initial capital")->required();
  primal_cmd->add_option("--tol", tol, "solver tolerance")->capture_default_str();
  primal_cmd->add_option("--csv", csv, "write node-level results to this file");

  auto* dual_cmd = app.add_subcommand(
      "solve-dual",
      "Minimize the conjugate functional over deflators scaled by y. CSV "
      "schema: node_id,time,prob,dkappa,z,Y");
  dual_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  dual_cmd->add_option("--y", y, "dual variable")->required();
  dual_cmd->add_option("--tol", tol, "solver tolerance")->capture_default_str();
  dual_cmd->add_option("--csv", csv, "write node-level results to this file");

  auto* verify_cmd = app.add_subcommand(
      "verify-duality",
      "Check the optimizer identities at x and y = u'(x), optionally plus a "
      "conjugacy grid scan. Report schema: check,x,y,value,residual,tolerance,pass");
  verify_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  verify_cmd->add_option("--x", x, "initial capital")->required();
  verify_cmd->add_option("--grid", verify_grid,
                         "lo:hi:n log-spaced grid for the conjugacy scan");
  verify_cmd->add_option("--report", report_path, "write check rows to this file");
  verify_cmd->add_option("--tol", tol, "solver tolerance")->capture_default_str();

  auto* sweep_cmd = app.add_subcommand(
      "sweep",
      "Tabulate u (axis x) or v (axis y) over a log-spaced grid with a "
      "derivative column and a shape summary row. CSV schema: "
      "index,point,value,derivative,note");
  sweep_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  sweep_cmd->add_option("--axis", axis, "x or y")->required();
  sweep_cmd->add_option("--grid", sweep_grid, "lo:hi:n, log-spaced")
      ->capture_default_str();
  sweep_cmd->add_option("--csv", csv, "write rows to this file instead of stdout");
  sweep_cmd->add_option("--tol", tol, "solver tolerance")->capture_default_str();

  auto* bessel_cmd = app.add_subcommand(
      "bessel-defect",
      "Monte Carlo martingale defect of the inverse Bessel(3) process via "
      "exact sampling. CSV schema: t,paths,estimate,std_error,defect");
  bessel_cmd->add_option("--t", t, "horizon")->capture_default_str();
  bessel_cmd->add_option("--paths", paths, "sample count")->capture_default_str();
  bessel_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
  bessel_cmd->add_option("--sweep", sweep_spec, "comma list of horizons; emits CSV");
  bessel_cmd->add_option("--csv", csv, "write rows to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*nupbr_cmd) return cmd_check_nupbr(scenario, csv, tol);
    if (*primal_cmd) return cmd_solve_primal(scenario, x, tol, csv);
    if (*dual_cmd) return cmd_solve_dual(scenario, y, tol, csv);
    if (*verify_cmd) return cmd_verify_duality(scenario, x, verify_grid, report_path, tol);
    if (*sweep_cmd) return cmd_sweep(scenario, axis, sweep_grid, csv, tol);
    if (*bessel_cmd) return cmd_bessel(t, paths, seed, sweep_spec, csv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
