// aoi-csma: command-line front end over the analysis library.
//
//   age       closed-form per-link and total average age
//   optimize  age-minimizing back-off rates and contention windows
//   simulate  discrete-event run (idealized, slotted, or round-robin MAC)
//   sweep     total age over a 2-D back-off grid
//   density   slotted-vs-ideal gap for growing symmetric networks
//   compare   optimized CSMA against a round-robin schedule
//
// Every subcommand reads one JSON config (--config) and renders CSV or JSON
// (--format) to stdout or --out. Exit codes: 0 success, 2 bad config or
// arguments, 3 numeric solver failure, 4 finished but at least one simulated
// link never delivered inside the horizon (output is still written).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "aoi/experiments.hpp"

namespace {

struct Args {
  CLI::App* sub = nullptr;
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  int grid = 0;
  double horizon_ms = 0.0;
};

void add_common(CLI::App& app, const char* name, const char* desc, Args& a) {
  a.sub = app.add_subcommand(name, desc);
  a.sub->add_option("--config", a.config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  a.sub->add_option("--out", a.out_path, "write here instead of stdout");
  a.sub->add_option("--format", a.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  a.sub->add_option("--seed", a.seed, "override the config seed");
  a.sub->add_option("--grid", a.grid, "override points per sweep axis");
  a.sub->add_option("--horizon-ms", a.horizon_ms, "override the horizon");
}

aoi::cli::Config load_config(const Args& a) {
  std::ifstream in(a.config_path);
  if (!in) throw aoi::ValidationError("cannot open config: " + a.config_path);
  aoi::cli::json j = aoi::cli::json::parse(in);
  aoi::cli::Config c = aoi::cli::parse_config(j);
  if (a.sub->count("--seed")) c.seed = a.seed;
  if (a.sub->count("--grid")) c.grid = a.grid;
  if (a.sub->count("--horizon-ms")) c.horizon_ms = a.horizon_ms;
  if (a.sub->count("--grid") && c.grid < 2)
    throw aoi::ValidationError("grid must be >= 2 points per axis");
  if (a.sub->count("--horizon-ms") && !(c.horizon_ms > 0.0))
    throw aoi::ValidationError("horizon must be positive");
  return c;
}

void write_output(const Args& a, const std::string& text) {
  if (a.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(a.out_path);
  if (!out) throw aoi::ValidationError("cannot write output: " + a.out_path);
  out << text;
}

std::string dump(const aoi::cli::json& j) { return j.dump(2) + "\n"; }

/// Returns the process exit code.
int dispatch(const Args& a) {
  const aoi::cli::Config c = load_config(a);
  const bool csv = a.format == "csv";
  const std::string name = a.sub->get_name();

  if (name == "age") {
    const aoi::csma::AgeBreakdown b = aoi::cli::run_age(c);
    write_output(a, csv ? aoi::cli::render_age_csv(b)
                        : dump(aoi::cli::render_age_json(b)));
    return 0;
  }
  if (name == "optimize") {
    const aoi::opt::BackoffAssignment got = aoi::cli::run_optimize(c);
    write_output(a, csv ? aoi::cli::render_optimize_csv(got)
                        : dump(aoi::cli::render_optimize_json(
                              got, aoi::cli::detail::resolve_r_ub(c))));
    return 0;
  }
  if (name == "simulate") {
    const aoi::cli::SimulateOutput got = aoi::cli::run_simulate(c);
    write_output(a, csv ? aoi::cli::render_simulate_csv(got)
                        : dump(aoi::cli::render_simulate_json(got)));
    return got.result.unconverged ? 4 : 0;
  }
  if (name == "sweep") {
    const std::vector<aoi::cli::SweepRow> rows = aoi::cli::run_sweep(c);
    write_output(a, csv ? aoi::cli::render_sweep_csv(rows)
                        : dump(aoi::cli::render_sweep_json(rows)));
    return 0;
  }
  if (name == "density") {
    const aoi::cli::DensityOutput got = aoi::cli::run_density(c);
    write_output(a, csv ? aoi::cli::render_density_csv(got)
                        : dump(aoi::cli::render_density_json(got)));
    return got.unconverged ? 4 : 0;
  }
  const aoi::cli::CompareOutput got = aoi::cli::run_compare(c);
  write_output(a, csv ? aoi::cli::render_compare_csv(got)
                      : dump(aoi::cli::render_compare_json(got)));
  return got.unconverged ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"age-of-information analysis for interfering CSMA links"};
  app.require_subcommand(1);

  Args args[6];
  add_common(app, "age", "closed-form average age of a configured network", args[0]);
  add_common(app, "optimize", "age-minimizing back-off rates", args[1]);
  add_common(app, "simulate", "discrete-event simulation of one scenario", args[2]);
  add_common(app, "sweep", "total age over a two-link back-off grid", args[3]);
  add_common(app, "density", "slotted-vs-ideal gap as the network grows", args[4]);
  add_common(app, "compare", "optimized CSMA against round-robin service", args[5]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const Args* chosen = nullptr;
  for (const Args& a : args)
    if (a.sub->parsed()) chosen = &a;
  if (chosen == nullptr) return 2;  // unreachable: a subcommand is required

  try {
    return dispatch(*chosen);
  } catch (const aoi::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const aoi::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
