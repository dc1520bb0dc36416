#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fkmc/config.hpp"
#include "fkmc/errors.hpp"
#include "fkmc/runner.hpp"

namespace {

struct Overrides {
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> n_paths;
  std::optional<std::string> output;
  std::optional<int> workers;
};

void add_common(CLI::App* sub, std::string& config_path, Overrides& ov) {
  sub->add_option("config", config_path, "JSON run configuration")->required();
  sub->add_option("--seed", ov.seed, "override the top-level seed");
  sub->add_option("--paths", ov.n_paths, "override n_paths");
  sub->add_option("--output", ov.output, "override the output path");
  sub->add_option("--workers", ov.workers, "override the worker count");
}

int run(fkmc::Command cmd, const std::string& config_path,
        const Overrides& ov) {
  fkmc::RunConfig cfg;
  try {
    cfg = fkmc::load_config_file(config_path, cmd);
  } catch (const fkmc::ConfigError& e) {
    std::cerr << "[fkmc] config error: " << e.what() << "\n";
    return 2;
  }
  if (ov.seed) cfg.seed = static_cast<std::uint64_t>(*ov.seed);
  if (ov.n_paths) {
    if (*ov.n_paths < 1) {
      std::cerr << "[fkmc] config error: --paths must be >= 1\n";
      return 2;
    }
    cfg.n_paths = *ov.n_paths;
  }
  if (ov.output) cfg.output = *ov.output;
  if (ov.workers) cfg.workers = *ov.workers;
  return fkmc::run_command(cfg, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo evaluation of matrix-valued Schrodinger semigroups"};
  app.require_subcommand(1);

  struct SubSpec {
    fkmc::Command cmd;
    const char* name;
    const char* help;
  };
  const SubSpec specs[] = {
      {fkmc::Command::semigroup, "semigroup",
       "estimate e^{-tH} f(x) along Brownian paths"},
      {fkmc::Command::kernel, "kernel",
       "estimate the integral kernel e^{-tH}(x,y) from bridge paths"},
      {fkmc::Command::heatmap, "heatmap",
       "kernel estimates over an (x,y) grid, written as delimited text"},
      {fkmc::Command::trace, "trace",
       "box-truncated trace of e^{-tH} by lattice quadrature"},
      {fkmc::Command::kato, "kato",
       "Monte Carlo Kato-class diagnostic for the potential"},
      {fkmc::Command::validate, "validate",
       "compare Monte Carlo estimates against the finite-difference oracle"},
  };

  std::string config_paths[6];
  Overrides overrides[6];
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(specs[i].name, specs[i].help);
    add_common(sub, config_paths[i], overrides[i]);
  }

  std::int64_t selftest_seed = 1;
  int selftest_workers = 0;
  CLI::App* selftest =
      app.add_subcommand("selftest", "run the module-invariant battery");
  selftest->add_option("--seed", selftest_seed, "randomization seed");
  selftest->add_option("--workers", selftest_workers, "worker count");

  CLI11_PARSE(app, argc, argv);

  if (selftest->parsed())
    return fkmc::run_selftest(static_cast<std::uint64_t>(selftest_seed),
                              selftest_workers, std::cerr);
  for (int i = 0; i < 6; ++i) {
    if (app.get_subcommands().front()->get_name() == specs[i].name)
      return run(specs[i].cmd, config_paths[i], overrides[i]);
  }
  return 2;
}
