// imptk: impedance models, extraction and stability sweeps from the shell.

#include <CLI11.hpp>

#include "imptk/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace imptk::cli;

  CLI::App app{"Impedance-based stability toolkit for grid-connected converters"};
  app.set_version_flag("--version", IMPTK_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  std::string domain = "both";
  app.add_option("--config", o.config_path, "case configuration file (key = value)");
  app.add_option("--out", o.out_dir, "output directory")->capture_default_str();
  app.add_option("--domain", domain, "dq, pn or both")->capture_default_str();
  app.add_option("--grid", o.grid, "fmin:fmax:n:log|lin")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads for simulation sweeps")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();

  auto* analytic = app.add_subcommand("analytic", "closed-form Z_S and Z_L with magnitude/angle plots");

  ExtractOptions eo;
  auto* extract = app.add_subcommand("extract", "identify Z_S and Z_L by shunt injection in simulation");
  extract->add_option("--model", eo.model, "matrix (two injections) or dec (one per channel)")
      ->capture_default_str();
  extract->add_option("--injections", eo.injections, "subset of dq1,dq2,pn1,pn2")->delimiter(',');
  extract->add_option("--amplitude", eo.amplitude_pu, "injection amplitude (pu)")->capture_default_str();
  extract->add_option("--window", eo.window_s, "DFT window (s)")->capture_default_str();

  StabilityOptions so;
  auto* stability = app.add_subcommand("stability", "minor loops, eigenvalue loci, eps and Nyquist verdicts");
  stability->add_option("--source", so.source, "analytic or extracted")->capture_default_str();
  stability->add_option("--eps-threshold", so.eps_threshold, "decoupling threshold")
      ->capture_default_str();
  stability->add_option("--amplitude", so.amplitude_pu, "injection amplitude for --source extracted (pu)")
      ->capture_default_str();
  stability->add_option("--window", so.window_s, "DFT window for --source extracted (s)")
      ->capture_default_str();

  CompareOptions co;
  auto* compare = app.add_subcommand("compare", "per-frequency differences of loci and eps between two runs");
  compare->add_option("dir_a", co.dir_a)->required();
  compare->add_option("dir_b", co.dir_b)->required();

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "single time-domain run, trace export");
  simulate->add_option("--stride", sim.stride, "keep every n-th sample")->capture_default_str();
  simulate->add_option("--offset", sim.offset_pu, "initial d-axis current offset (pu)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  o.argv.assign(argv + 1, argv + argc);
  return guarded([&] {
    o.domain = parse_domain(domain);
    if (analytic->parsed()) return cmd_analytic(o);
    if (extract->parsed()) return cmd_extract(o, eo);
    if (stability->parsed()) return cmd_stability(o, so);
    if (compare->parsed()) return cmd_compare(o, co);
    if (simulate->parsed()) return cmd_simulate(o, sim);
    return static_cast<int>(exit_usage);
  });
}
