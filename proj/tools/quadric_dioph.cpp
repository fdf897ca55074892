// quadric-dioph <subcommand> --config <file> [--h-max N --seed S --out DIR]
//
// Exit status: 0 when every check passes, 1 on a failed check, 2 on a usage
// or configuration error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qdioph/experiment.hpp"

namespace ex = qdioph::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Rational points, Diophantine approximation and Schmidt games on rational quadrics"};
  app.set_version_flag("--version", std::string(ex::kLibraryVersion));
  app.require_subcommand(1);

  std::string config;
  std::optional<qdioph::Int> h_max;
  std::optional<qdioph::Int> seed;
  std::string out = "results";
  bool quiet = false;

  for (const auto& name : ex::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config, "JSON config, or a manifest.json from an earlier run")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--h-max", h_max, "override the height cap")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "results root")->capture_default_str();
    sub->add_flag("-q,--quiet", quiet, "print nothing on success");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string experiment = app.get_subcommands().front()->get_name();
  ex::RunOptions opt;
  opt.out_dir = out;
  opt.h_max = h_max;
  opt.seed = seed;
  const auto res = ex::run_file(experiment, config, opt, std::cerr);
  if (res.exit_code == 2) {
    std::cerr << "quadric-dioph: " << res.message << "\n";
  } else if (res.exit_code == 1 && res.summary.is_null()) {
    std::cerr << "quadric-dioph: " << experiment << ": " << res.message << "\n";
  } else if (!quiet || res.exit_code != 0) {
    std::cout << res.message << "\n";
  }
  return res.exit_code;
}
