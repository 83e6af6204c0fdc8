// c3bf: run scenarios, compare barriers, run the validation suite.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "c3bf/validation.hpp"

namespace fs = std::filesystem;
using namespace c3bf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSafety = 2;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class Model>
fs::path agent_path(const fs::path& base, const TrajectoryLog<Model>& log, bool multi) {
  if (!multi) return base;
  fs::path p = base;
  p.replace_filename(base.stem().string() + "_" + log.agent_id + base.extension().string());
  return p;
}

template <class Model>
double zero_lgh_fraction(const TrajectoryLog<Model>& log) {
  std::size_t zero = 0, total = 0;
  for (const auto& rec : log.records) {
    for (const auto& o : rec.obstacles) {
      ++total;
      if (o.lgh_norm < kDegenerateNorm) ++zero;
    }
  }
  return total ? static_cast<double>(zero) / static_cast<double>(total) : 0.0;
}

struct RunArgs {
  std::string scenario;
  std::string out;
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& a) {
  AnyScenario any = load_scenario(a.scenario);
  return std::visit(
      [&](auto& sc) {
        if (a.dt) sc.sim.dt = *a.dt;
        if (a.duration) sc.sim.duration = *a.duration;
        if (a.seed) sc.sim.seed = *a.seed;
        validate_scenario(sc);
        const auto t0 = std::chrono::steady_clock::now();
        const auto logs = run_all(sc);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = true;
        for (const auto& log : logs) {
          write_csv_file(agent_path(a.out, log, logs.size() > 1), log);
          const auto rep = collision_report(log);
          ok = ok && log.status == RunStatus::Completed;
          std::cout << sc.label << " [" << log.agent_id << "] status=" << to_string(log.status)
                    << " min_h=" << num(rep.min_h()) << " min_margin=" << num(rep.min_margin())
                    << " wall=" << num(wall) << "s";
          if (!log.message.empty()) std::cout << " (" << log.message << ")";
          std::cout << '\n';
        }
        return ok ? kExitOk : kExitSafety;
      },
      any);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_compare(const std::string& scenario, const std::string& barriers, const std::string& out_dir,
                std::optional<double> hocbf_gamma) {
  const AnyScenario any = load_scenario(scenario);
  const auto names = split_list(barriers);
  if (names.empty()) throw SchemaError("--barriers: empty list");
  fs::create_directories(out_dir);
  return std::visit(
      [&](const auto& base) {
        using Model = typename ScenarioModel<std::decay_t<decltype(base)>>::type;
        double gamma = hocbf_gamma.value_or(1.0);
        if (!hocbf_gamma && base.barrier.type == BarrierType::HOCBF) gamma = base.barrier.gamma;

        std::vector<Scenario<Model>> runs;
        for (const auto& n : names) {
          auto sc = base;
          if (n == "c3bf") {
            sc.barrier = BarrierKind::c3bf();
          } else if (n == "hocbf") {
            sc.barrier = BarrierKind::hocbf(gamma);
          } else if (n == "ellipse") {
            sc.barrier = BarrierKind::ellipse();
          } else {
            throw SchemaError("--barriers: unknown barrier '" + n + "'");
          }
          // baselines may start outside their own safe set on the same initial condition
          validate_scenario(sc, false);
          runs.push_back(sc);
        }

        std::printf("%-3s %-8s %-20s %-12s %-12s %-10s %-14s %s\n", "#", "barrier", "status", "min_h",
                    "min_margin", "zero_lgh", "lgh_class", "csv");
        for (std::size_t i = 0; i < runs.size(); ++i) {
          const auto& sc = runs[i];
          const auto logs = run_all(sc);
          const auto rep =
              lgh_degeneracy_report<Model>(sc.barrier, 2000, sc.sim.seed, sc.params,
                                           {std::is_same_v<Model, Quadrotor> && !sc.obstacles.empty() &&
                                                is_cylinder(sc.obstacles.front()),
                                            0.0, 0.0});
          const fs::path base_csv =
              fs::path(out_dir) / (base.label + "_" + std::to_string(i) + "_" + names[i] + ".csv");
          for (const auto& log : logs) {
            const auto path = agent_path(base_csv, log, logs.size() > 1);
            write_csv_file(path, log);
            const auto cr = collision_report(log);
            std::printf("%-3zu %-8s %-20s %-12s %-12s %-10s %-14s %s\n", i, names[i].c_str(),
                        to_string(log.status).c_str(), num(cr.min_h()).c_str(), num(cr.min_margin()).c_str(),
                        num(zero_lgh_fraction(log)).c_str(), to_string(rep.classification).c_str(),
                        path.string().c_str());
          }
        }
        return kExitOk;
      },
      any);
}

int cmd_validate(const ValidationOptions& opt) {
  bool all = true;
  const auto print = [&](const CheckResult& c) {
    all = all && c.passed;
    std::cout << "  [" << (c.passed ? "PASS" : "FAIL") << "] " << c.name << ": " << c.detail << '\n';
  };
  for (const auto& crit : acceptance_suite(opt)) {
    std::cout << (crit.passed() ? "PASS" : "FAIL") << " criterion " << crit.id << ": " << crit.title << '\n';
    for (const auto& c : crit.checks) print(c);
  }
  std::cout << "module invariants\n";
  for (const auto& c : check_module_invariants(opt)) print(c);
  std::cout << (all ? "all checks passed" : "some checks FAILED") << '\n';
  return all ? kExitOk : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision-cone CBF safety filter simulator"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Simulate one scenario and write its trajectory CSV");
  run->add_option("scenario", ra.scenario, "Scenario JSON")->required();
  run->add_option("--out", ra.out, "Output CSV (multi-agent: one file per agent id)")->required();
  run->add_option("--dt", ra.dt, "Override sim.dt");
  run->add_option("--duration", ra.duration, "Override sim.duration");
  run->add_option("--seed", ra.seed, "Override sim.seed");

  std::string cmp_scenario, cmp_barriers, cmp_out;
  std::optional<double> cmp_gamma;
  auto* cmp = app.add_subcommand("compare", "Run one scenario under several barriers");
  cmp->add_option("scenario", cmp_scenario, "Scenario JSON")->required();
  cmp->add_option("--barriers", cmp_barriers, "Comma-separated list of c3bf, hocbf, ellipse")->required();
  cmp->add_option("--out-dir", cmp_out, "Directory for the CSVs")->required();
  cmp->add_option("--hocbf-gamma", cmp_gamma, "HOCBF gamma (default: scenario value, else 1)");

  ValidationOptions vo;
  vo.scenario_dir = C3BF_SCENARIO_DIR;
  std::string scenario_dir = vo.scenario_dir.string();
  auto* val = app.add_subcommand("validate", "Run the invariant and acceptance checks");
  val->add_option("--seed", vo.seed, "Sampling seed");
  val->add_option("--scenario-dir", scenario_dir, "Directory holding corpus/, comparison/, unsafe/");
  val->add_flag("--corrupt-lgh-sign", vo.corrupt_lgh_sign, "Flip Lg h before the derivative check (self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(ra);
    if (*cmp) return cmd_compare(cmp_scenario, cmp_barriers, cmp_out, cmp_gamma);
    vo.scenario_dir = scenario_dir;
    return cmd_validate(vo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
