// kdbirl: gen-data | fit | eval | sweep

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "kdbirl/config.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/experiment.hpp"
#include "kdbirl/io.hpp"

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> data;
  std::optional<std::string> chain;
  std::size_t jobs = 1;
};

// --out, else $KDBIRL_OUTPUT_ROOT, else the working directory.
fs::path output_dir(const Options& o) {
  if (o.out) return *o.out;
  if (const char* root = std::getenv("KDBIRL_OUTPUT_ROOT"); root && *root) return root;
  return fs::current_path();
}

kdbirl::ExperimentConfig load_config(const Options& o) {
  auto cfg = kdbirl::parse_config(kdbirl::read_file(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.method) cfg.method.id = *o.method;
  kdbirl::validate_config(cfg);
  return cfg;
}

void report(const kdbirl::Error& e, const std::string& command) {
  const nlohmann::json record = {{"error", e.kind()},
                                 {"exit_code", static_cast<int>(e.code())},
                                 {"command", command},
                                 {"message", e.what()}};
  std::cerr << record.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel density Bayesian inverse reinforcement learning"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--method", o.method, "override the method id")
        ->check(CLI::IsMember({"kdbirl", "birl"}));
  };
  auto* gen = app.add_subcommand("gen-data", "plan experts and roll out demonstrations");
  add_common(gen);
  auto* fit = app.add_subcommand("fit", "sample the reward posterior");
  add_common(fit);
  fit->add_option("--data", o.data, "dataset directory (default: output directory)");
  auto* eval = app.add_subcommand("eval", "EVD, posterior summary and density grids");
  add_common(eval);
  eval->add_option("--chain", o.chain, "chain CSV (default: <out>/chain.csv)");
  auto* sweep = app.add_subcommand("sweep", "seeds x n values x methods");
  add_common(sweep);
  sweep->add_option("--jobs", o.jobs, "parallel sub-runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(kdbirl::ExitCode::configuration);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = load_config(o);
    const fs::path out = output_dir(o);
    if (command == "gen-data") {
      kdbirl::cmd_gen_data(cfg, out);
    } else if (command == "fit") {
      kdbirl::cmd_fit(cfg, o.data ? fs::path(*o.data) : out, out);
    } else if (command == "eval") {
      kdbirl::cmd_eval(cfg, o.chain ? fs::path(*o.chain) : out / "chain.csv", out);
    } else {
      kdbirl::cmd_sweep(cfg, out, o.jobs);
    }
  } catch (const kdbirl::Error& e) {
    report(e, command);
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    report(kdbirl::DataError(e.what()), command);
    return static_cast<int>(kdbirl::ExitCode::data);
  }
  return 0;
}
