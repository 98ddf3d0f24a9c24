#include <iostream>

#include <CLI11.hpp>

#include "hypoctrl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hypoctrl: quadratic operators, OU semigroups and null control"};
  app.require_subcommand(1);
  hypoctrl::cli::Options opt;
  std::uint64_t seed = 0;
  int threads = 0;
  for (const std::string& name : hypoctrl::config::commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "JSON run configuration")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hypoctrl::cli::schema_violation;
  }
  CLI::App* sub = app.get_subcommands().front();
  opt.command = sub->get_name();
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--threads")) opt.threads = threads;
  return hypoctrl::cli::run(opt);
}
