// hifind CLI: thin front end over the libhifind C API. Subcommand
// parameters come from an optional --config file plus key=value overrides
// on the command line (later values win).

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hifind.h"

namespace {

constexpr const char* kCommands[] = {"synth",    "train", "infer",
                                     "baseline", "eval",  "render"};

int run(const std::string& command, const std::string& config_path,
        long long seed, bool seed_set, long long jobs, bool jobs_set,
        bool deterministic, const std::vector<std::string>& overrides) {
  std::string text;
  if (!config_path.empty()) {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) {
      std::fprintf(stderr, "hifind %s: cannot open config file: %s\n",
                   command.c_str(), config_path.c_str());
      return HIFIND_ERR_USAGE;
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
    text += "\n";
  }
  for (const auto& kv : overrides) {
    if (kv.find('=') == std::string::npos) {
      std::fprintf(stderr,
                   "hifind %s: expected key=value override, got '%s'\n",
                   command.c_str(), kv.c_str());
      return HIFIND_ERR_USAGE;
    }
    text += kv;
    text += "\n";
  }
  if (seed_set) text += "seed=" + std::to_string(seed) + "\n";
  if (jobs_set) text += "jobs=" + std::to_string(jobs) + "\n";
  if (deterministic) text += "deterministic=1\n";

  const int rc = hifind_run(command.c_str(), text.c_str());
  if (rc != HIFIND_OK)
    std::fprintf(stderr, "hifind %s: %s\n", command.c_str(),
                 hifind_last_error());
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hifind - HI source finding toolkit (synthetic cubes, "
               "Unet-LK training/inference, smooth-and-clip baseline, "
               "evaluation, rendering)"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    long long seed = 0;
    long long jobs = 0;
    bool deterministic = false;
    std::vector<std::string> overrides;
  };
  std::vector<std::pair<std::string, Args>> parsed;
  parsed.reserve(std::size(kCommands));

  std::vector<CLI::Option*> seed_opts, jobs_opts;
  for (const char* name : kCommands) {
    parsed.emplace_back(name, Args{});
    Args& a = parsed.back().second;
    auto* sub = app.add_subcommand(name, std::string("run the ") + name +
                                             " stage");
    sub->add_option("--config", a.config, "key=value config file");
    seed_opts.push_back(sub->add_option("--seed", a.seed, "RNG seed"));
    jobs_opts.push_back(
        sub->add_option("--jobs", a.jobs, "parallel workers (0 = auto)"));
    sub->add_flag("--deterministic", a.deterministic,
                  "single-worker bit-reproducible mode");
    sub->add_option("overrides", a.overrides,
                    "config overrides as key=value");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : HIFIND_ERR_USAGE;
  }

  for (size_t i = 0; i < parsed.size(); ++i) {
    const auto& [name, args] = parsed[i];
    if (!app.got_subcommand(name)) continue;
    return run(name, args.config, args.seed, seed_opts[i]->count() > 0,
               args.jobs, jobs_opts[i]->count() > 0, args.deterministic,
               args.overrides);
  }
  std::fprintf(stderr, "hifind: no subcommand given\n");
  return HIFIND_ERR_USAGE;
}
