#include "experiment.hpp"

#include "radnls/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
  std::string config;
  std::string out;
  int workers = 0;
  long long seed = -1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "config document (key = value, [section] headers)")->required();
  sub->add_option("--out", c.out, "output directory (overrides output.dir)");
  sub->add_option("--workers", c.workers, "worker threads for sweep")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "perturbation seed")->check(CLI::NonNegativeNumber);
}

int print_findings(const std::vector<radnls::cli::Finding>& f) {
  for (const auto& x : f)
    std::cerr << x.field << ": " << x.reason << '\n';
  return f.empty() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  using namespace radnls::cli;
  CLI::App app{"radial spectral lab for focusing NLS with an inverse-square potential"};
  app.require_subcommand(1);
  Common common;
  const std::vector<std::string> names{"groundstate", "evolve", "dispersive", "sweep", "virial-check",
                                       "validate"};
  for (const auto& n : names)
    add_common(app.add_subcommand(n, n == "validate" ? "check a config and list findings"
                                                     : "run the " + n + " scenario"),
               common);
  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    ParsedConfig parsed = load_config(common.config);
    ExperimentConfig& cfg = parsed.config;
    if (sub != "validate")
      cfg.scenario = *parse_scenario(sub);
    if (!common.out.empty())
      cfg.out_dir = common.out;
    if (common.workers > 0)
      cfg.workers = common.workers;
    if (common.seed >= 0)
      cfg.seed = static_cast<std::uint64_t>(common.seed);

    auto findings = parsed.findings;
    for (auto& f : validate(cfg))
      findings.push_back(std::move(f));
    if (sub == "validate") {
      if (findings.empty())
        std::cout << "ok " << to_string(cfg.scenario) << " hash=" << config_hash(cfg) << '\n';
      return print_findings(findings);
    }
    if (!findings.empty()) {
      std::cerr << "configuration error, nothing written\n";
      return print_findings(findings);
    }
    const RunResult res = run(cfg);
    for (const auto& f : res.files)
      std::cout << f.string() << '\n';
    std::cout << res.summary << '\n';
    if (res.exit_code == 3)
      std::cerr << "status: blowup-breach (partial series written)\n";
    return res.exit_code;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
