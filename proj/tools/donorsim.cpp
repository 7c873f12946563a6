// donorsim command-line runner.
#include "donorsim/scenarios.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kUsage = 1;
constexpr int kUnknownScenario = 2;
constexpr int kConfigError = 3;
constexpr int kSimulationAbort = 4;

int list_scenarios() {
  for (const auto& s : donorsim::scenarios())
    std::cout << s.name << "  [" << s.default_noise << "]  " << s.description << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"donorsim: donor-spin register simulator"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list registered scenarios");

  donorsim::RunRequest req;
  auto* run = app.add_subcommand("run", "run one scenario and write results.json + CSVs");
  run->add_option("scenario", req.scenario, "scenario name (see `donorsim list`)")->required();
  run->add_option("--config", req.config_path, "device or scenario config (JSON)")->required();
  run->add_option("--seed", req.seed, "RNG seed")->required();
  run->add_option("--out", req.out_dir, "output directory")->required();
  run->add_option("--noise", req.noise, "noise toggle (default: per scenario)")
      ->check(CLI::IsMember({"none", "dephasing", "crosstalk", "both"}));
  run->add_option("--threads", req.threads, "worker cap (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*list) return list_scenarios();

  const auto* info = donorsim::find_scenario(req.scenario);
  if (!info) {
    std::cerr << "unknown scenario '" << req.scenario << "'; try `donorsim list`\n";
    return kUnknownScenario;
  }
  if (req.threads > 0) donorsim::set_thread_cap(req.threads);

  try {
    const auto results = donorsim::run_scenario(*info, req);
    std::cout << results.at("summary").dump(2) << '\n';
  } catch (const donorsim::ConfigError& e) {
    donorsim::log::error(e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    donorsim::log::error(std::string("simulation aborted: ") + e.what());
    return kSimulationAbort;
  }
  return 0;
}
