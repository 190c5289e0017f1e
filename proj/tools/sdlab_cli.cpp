#include "sdlab/scenario.hpp"
#include "sdlab/suites.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sdlab;

namespace {

constexpr const char* kCsvHeader = "t,E,F,L,A,D_H,D_V,cross1,cross2,cross3";

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_csv(const fs::path& path, const CompareResult& cmp) {
  std::ofstream out(path);
  out << kCsvHeader;
  if (!cmp.reports.empty())
    for (const auto& v : cmp.reports.front().verdicts) out << ',' << v.name;
  out << '\n' << std::setprecision(12);
  for (const auto& r : cmp.reports) {
    out << r.t << ',' << r.E << ',' << r.F << ',' << r.L << ',' << r.A << ',' << r.D_H << ',' << r.D_V << ',' << r.cross1
        << ',' << r.cross2 << ',' << r.cross3;
    for (const auto& v : r.verdicts) out << ',' << (v.pass ? 1 : 0);
    out << '\n';
  }
}

json verdict_summary(const CompareResult& cmp) {
  json out = json::object();
  if (cmp.reports.empty()) return out;
  for (std::size_t k = 0; k < cmp.reports.front().verdicts.size(); ++k) {
    const auto& first = cmp.reports.front().verdicts[k];
    bool pass = true;
    double slack = std::numeric_limits<double>::infinity();
    json constants = json::object();
    for (const auto& r : cmp.reports) {
      const auto& v = r.verdicts[k];
      pass = pass && v.pass;
      slack = std::min(slack, v.slack);
      for (const auto& [name, value] : v.constants) {
        const double prev = constants.contains(name) && constants[name].is_number() ? constants[name].get<double>() : -1e300;
        constants[name] = finite_or_null(std::max(prev, value));
      }
    }
    out[first.name] = {{"pass", pass}, {"min_slack", finite_or_null(slack)}, {"constants", constants}};
  }
  return out;
}

json comparison_json(const CompareResult& cmp) {
  return {{"delta", cmp.delta},
          {"quadrature_floor", cmp.floor},
          {"samples", cmp.reports.size()},
          {"gronwall",
           {{"pass", cmp.gronwall.pass},
            {"C_fit", finite_or_null(cmp.gronwall.C_fit)},
            {"at_floor", cmp.gronwall.at_floor},
            {"exp_slack", finite_or_null(cmp.gronwall.exp_slack)},
            {"integral_slack", finite_or_null(cmp.gronwall.integral_slack)},
            {"error", cmp.gronwall_error}}},
          {"E_plus_F_monotone", cmp.monotone},
          {"E0_plus_F0", cmp.reports.empty() ? 0.0 : cmp.reports.front().E + cmp.reports.front().F},
          {"verdicts", verdict_summary(cmp)},
          {"pass", cmp.pass()}};
}

json run_json(const RunResult& r) {
  return {{"accepted_steps", r.accepted},
          {"rejected_steps", r.rejected},
          {"final_time", r.final_state.time},
          {"length_monotone", r.length_monotone},
          {"max_area_drift", r.max_area_drift},
          {"final_isoperimetric_ratio", r.final_state.isoperimetric_ratio()}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << std::setw(2) << j << '\n';
}

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SDLAB_OUTPUT_ROOT")) return env;
  return "out";
}

int simulate_one(const fs::path& config, const fs::path& root, std::optional<std::uint64_t> seed, int jobs) {
  Scenario sc = load_scenario(config);
  if (seed) sc.seed = *seed;
  const fs::path dir = root / (sc.output.empty() ? sc.name : sc.output);
  fs::create_directories(dir);
  const ScenarioResult res = run_scenario(sc, jobs);
  res.weak_run.trajectory.export_to(dir / "weak");
  if (res.strong_run) res.strong_run->trajectory.export_to(dir / "strong");
  write_csv(dir / "energy.csv", res.comparison);
  json bubbles = json::array();
  for (const auto& b : res.data.bubbles) bubbles.push_back({{"center", {b.center.x(), b.center.y()}}, {"radius", b.radius}});
  json summary = {{"scenario", sc.name},
                  {"seed", sc.seed},
                  {"config", config.string()},
                  {"reference_evolves", sc.reference_evolves},
                  {"weak_vs_strong_proxy", "weak = coarse or perturbed run, strong = reference run"},
                  {"bubbles", bubbles},
                  {"gauss_bonnet_max", res.gauss_bonnet_max},
                  {"weak_run", run_json(res.weak_run)},
                  {"comparison", comparison_json(res.comparison)}};
  if (res.strong_run) summary["strong_run"] = run_json(*res.strong_run);
  const bool ok = res.comparison.pass() && res.weak_run.length_monotone && res.gauss_bonnet_max <= 1e-3;
  summary["pass"] = ok;
  write_json(dir / "summary.json", summary);
  std::cout << sc.name << ": " << (ok ? "PASS" : "FAIL") << " C_fit=" << res.comparison.gronwall.C_fit
            << " samples=" << res.comparison.reports.size() << " -> " << dir.string() << '\n';
  return ok ? 0 : 1;
}

int cmd_simulate(const std::vector<std::string>& configs, const std::string& out, std::optional<std::uint64_t> seed,
                 int jobs) {
  const fs::path root = output_root(out);
  int failures = 0;
  const int lanes = std::max(1, jobs);
  for (std::size_t start = 0; start < configs.size(); start += lanes) {
    std::vector<std::future<int>> fut;
    for (std::size_t k = start; k < std::min(configs.size(), start + lanes); ++k)
      fut.push_back(std::async(lanes > 1 ? std::launch::async : std::launch::deferred,
                               [&, k] { return simulate_one(configs[k], root, seed, 1); }));
    for (auto& f : fut) {
      try {
        failures += f.get();
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        ++failures;
      }
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_verify(const std::string& suite) {
  if (suite.empty()) throw Error(ErrorKind::Usage, "cli", "suite name is empty");
  std::vector<std::string> names;
  if (suite == "all") names = suite_names();
  else names = {suite};
  bool ok = true;
  for (const auto& n : names) {
    const SuiteResult r = run_suite(n);
    for (const auto& c : r.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << r.suite << '/' << c.name << " value=" << c.value << " limit=" << c.limit
                << '\n';
    ok = ok && r.pass();
  }
  return ok ? 0 : 1;
}

int cmd_compare(const std::string& weak_dir, const std::string& strong_dir, const std::string& delta,
                const std::string& out, std::optional<std::uint64_t> seed, int jobs) {
  CompareOptions opt;
  if (delta != "auto") {
    try {
      opt.delta = std::stod(delta);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Usage, "cli", "--delta must be a number or 'auto'");
    }
    if (!(opt.delta > 0.0)) throw Error(ErrorKind::Usage, "cli", "--delta must be positive");
  }
  opt.jobs = jobs;
  if (seed) opt.seed = *seed;
  const Trajectory weak = Trajectory::load(weak_dir);
  const Trajectory strong = Trajectory::load(strong_dir);
  const ReferenceTrack track = strong.samples.size() == 1 ? ReferenceTrack(strong.samples.front().curve) : ReferenceTrack(strong);
  opt.extension = !track.stationary();
  const CompareResult cmp = compare_trajectories(weak, track, opt);
  const fs::path dir = output_root(out);
  fs::create_directories(dir);
  write_csv(dir / "energy.csv", cmp);
  json summary = {{"weak", weak_dir}, {"strong", strong_dir}, {"seed", opt.seed}, {"comparison", comparison_json(cmp)},
                  {"pass", cmp.pass()}};
  write_json(dir / "summary.json", summary);
  std::cout << "compare: " << (cmp.pass() ? "PASS" : "FAIL") << " delta=" << cmp.delta << " C_fit=" << cmp.gronwall.C_fit
            << " -> " << dir.string() << '\n';
  return cmp.pass() ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  const fs::path p(dir);
  std::ifstream in(p / "summary.json");
  if (!in) throw Error(ErrorKind::Config, "cli", "no summary.json in " + dir);
  json s;
  try {
    in >> s;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "cli", (p / "summary.json").string() + ": " + e.what());
  }
  const json& c = s.at("comparison");
  std::cout << "scenario  " << s.value("scenario", std::string("(compare)")) << '\n';
  std::cout << "delta     " << c.at("delta") << '\n';
  std::cout << "samples   " << c.at("samples") << '\n';
  std::cout << "E0+F0     " << c.at("E0_plus_F0") << '\n';
  std::cout << "C_fit     " << c.at("gronwall").at("C_fit") << '\n';
  std::cout << "monotone  " << c.at("E_plus_F_monotone") << '\n';
  for (const auto& [name, v] : c.at("verdicts").items())
    std::cout << (v.at("pass").get<bool>() ? "PASS " : "FAIL ") << name << " min_slack=" << v.at("min_slack") << '\n';
  std::ifstream csv(p / "energy.csv");
  std::string line;
  long rows = -1;
  double peak = 0.0;
  while (std::getline(csv, line)) {
    if (++rows == 0) continue;
    std::stringstream ss(line);
    std::string t, e, f;
    std::getline(ss, t, ',');
    std::getline(ss, e, ',');
    std::getline(ss, f, ',');
    peak = std::max(peak, std::stod(e) + std::stod(f));
  }
  std::cout << "rows      " << std::max(0L, rows) << '\n';
  std::cout << "max E+F   " << peak << '\n';
  const bool ok = s.value("pass", false);
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface diffusion stability lab"};
  app.require_subcommand(1);
  std::string out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  app.add_option("--out", out, "Output directory (default $SDLAB_OUTPUT_ROOT or ./out)");
  app.add_option("--jobs", jobs, "Concurrent scenarios or samples")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Override the scenario seed");

  auto* sim = app.add_subcommand("simulate", "Run scenario files");
  std::vector<std::string> configs;
  sim->add_option("config", configs, "Scenario YAML files")->required()->check(CLI::ExistingFile);

  auto* ver = app.add_subcommand("verify", "Run an invariant suite (geometry, poisson, poisson-convergence, calibration, extension, energy, all)");
  std::string suite;
  ver->add_option("suite", suite, "Suite name")->required();

  auto* cmp = app.add_subcommand("compare", "Compare a weak trajectory against a strong one");
  std::string weak_dir, strong_dir, delta = "auto";
  cmp->add_option("weak", weak_dir, "Weak trajectory directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("strong", strong_dir, "Strong trajectory directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--delta", delta, "Tube width or 'auto'");

  auto* rep = app.add_subcommand("report", "Summarise an output directory");
  std::string report_dir;
  rep->add_option("dir", report_dir, "Output directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (*sim) return cmd_simulate(configs, out, seed, jobs);
    if (*ver) return cmd_verify(suite);
    if (*cmp) return cmd_compare(weak_dir, strong_dir, delta, out, seed, jobs);
    if (*rep) return cmd_report(report_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
