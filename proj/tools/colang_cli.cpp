#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "colang/config.hpp"
#include "colang/experiment.hpp"
#include "colang/log.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

int run(colang::Experiment kind, const std::string& path, const Overrides& o) {
  colang::RunConfig config = colang::parse_config(path);
  config.experiment = kind;
  if (o.seed) {
    config.run.seed = *o.seed;
    config.run.seed_list.clear();
    config.run.seed_count = 1;
  }
  if (o.seeds) {
    config.run.seed_list.clear();
    config.run.seed_count = *o.seeds;
  }
  if (o.out) config.run.output = *o.out;
  if (o.threads) config.run.threads = *o.threads;
  return colang::run_experiment(config, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Langevin training of small networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  std::string path;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  const std::pair<const char*, colang::Experiment> commands[] = {
      {"train", colang::Experiment::Train},
      {"curvature-study", colang::Experiment::CurvatureStudy},
      {"ortho-depth-study", colang::Experiment::OrthoDepthStudy},
      {"sample-verify", colang::Experiment::SampleVerify},
      {"gradcheck", colang::Experiment::Gradcheck},
  };
  std::optional<colang::Experiment> chosen;
  for (const auto& [name, kind] : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config", path, "Config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "First (or only) seed");
    sub->add_option("--seeds", o.seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->callback([&chosen, kind = kind] { chosen = kind; });
  }
  CLI11_PARSE(app, argc, argv);
  if (quiet) colang::set_log_level(colang::LogLevel::Quiet);

  try {
    return run(*chosen, path, o);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
}
