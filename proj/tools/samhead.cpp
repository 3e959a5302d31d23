// Copyright 2026 The samhead Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// samhead: synth | train | detect | eval | sweep | plot

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "samhead/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  int threads = -1;
  bool verbose = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("-c,--config", f.config, "Run config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("-o,--out", f.out, "Output directory")->capture_default_str();
  sub->add_option("-s,--seed", f.seed, "Seed override for the config's seed");
  sub->add_option("-t,--threads", f.threads,
                  "Worker threads, 0 = all cores (default: $SAMHEAD_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);
  sub->add_flag("-v,--verbose", f.verbose, "Per-stage progress on stderr");
  sub->add_flag("-q,--quiet", f.quiet, "No progress output");
}

int fail(std::string_view code, const std::string& message, int exit_code) {
  std::cerr << samhead::error_line(code, message, exit_code) << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-aware boosted-forest pedestrian detection head"};
  app.require_subcommand(1, 1);
  Flags flags;

  using Runner = std::function<void(const samhead::RunConfig&, const samhead::CommandOptions&)>;
  std::vector<std::pair<CLI::App*, Runner>> commands;
  auto add = [&](const char* name, const char* help, Runner run) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    commands.emplace_back(sub, std::move(run));
  };
  add("synth", "Generate a seeded synthetic dataset into --out",
      [](const auto& c, const auto& o) { samhead::cmd_synth(c, o); });
  add("train", "Train a detector; writes model.json and manifest.json",
      [](const auto& c, const auto& o) { samhead::cmd_train(c, o); });
  add("detect", "Run a model over a dataset; writes detections.csv",
      [](const auto& c, const auto& o) { samhead::cmd_detect(c, o); });
  add("eval", "Score detections; writes metrics.json and curve CSVs",
      [](const auto& c, const auto& o) { samhead::cmd_eval(c, o); });
  add("sweep", "Layer-combination ablation; writes sweep.csv",
      [](const auto& c, const auto& o) { samhead::cmd_sweep(c, o); });
  add("plot", "Render curve CSVs; writes plot.svg",
      [](const auto& c, const auto& o) { samhead::cmd_plot(c, o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), samhead::kExitUsage);
  }

  samhead::CommandOptions opt;
  opt.out_dir = flags.out;
  opt.verbosity = flags.quiet ? 0 : (flags.verbose ? 2 : 1);
  opt.threads = samhead::resolve_threads(
      flags.threads >= 0 ? static_cast<unsigned>(flags.threads) : samhead::threads_from_env(1));

  for (auto& [sub, run] : commands) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed") > 0) opt.seed = flags.seed;
    try {
      const samhead::RunConfig cfg = samhead::read_run_config(flags.config);
      run(cfg, opt);
      return samhead::kExitOk;
    } catch (const samhead::Error& e) {
      return fail(samhead::error_code_name(e.code()), e.what(), samhead::exit_code_for(e.code()));
    } catch (const nlohmann::json::exception& e) {
      return fail("invalid_config", e.what(), samhead::kExitUsage);
    } catch (const std::exception& e) {
      return fail("internal", e.what(), samhead::kExitInternal);
    }
  }
  return fail("internal", "no subcommand ran", samhead::kExitInternal);
}
