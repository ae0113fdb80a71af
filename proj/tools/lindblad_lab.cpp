// lindblad_lab run|compare|rates <config.json> [--out-dir DIR] [--override key=value]...

#include "lindblad_lab/scenario.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  namespace lc = lindblad_lab::cli;
  CLI::App app{"Open-system derivation lab: exact, coefficient-equation and Lindblad pipelines"};
  app.require_subcommand(1);

  std::string config;
  lc::CommandOptions opt;
  unsigned seed = 0;  // reserved; every pipeline is deterministic

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "scenario JSON")->required();
    sub->add_option("--override", opt.overrides, "dotted.key=json_value, repeatable");
  };
  auto* run = app.add_subcommand("run", "write one CSV per pipeline and a report");
  auto* compare = app.add_subcommand("compare", "pairwise distances and decay fits (>= 2 pipelines)");
  auto* rates = app.add_subcommand("rates", "print gamma and epsilon for the spectral density");
  for (auto* sub : {run, compare, rates}) {
    add_common(sub);
    sub->fallthrough();  // --seed may follow the subcommand
  }
  for (auto* sub : {run, compare}) sub->add_option("--out-dir", opt.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "reserved, unused");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lc::kParseError;
  }

  if (*run) return lc::command_run(config, opt);
  if (*compare) return lc::command_compare(config, opt);
  return lc::command_rates(config, opt);
}
