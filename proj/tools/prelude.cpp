// Copyright 2026 The Prelude Authors
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

// prelude: experiment runner.
//
//   prelude effectiveness|pathlen|microbench|verify-fixture --config <file> --seed <u64> --out <dir>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prelude/errors.hpp"
#include "prelude/harness.hpp"

namespace {

using prelude::ExperimentConfig;

int effectiveness(const ExperimentConfig& c) {
  const auto result = prelude::run_effectiveness(c);
  if (prelude::derive_rows(result.events, "effectiveness") != result.rows) {
    std::cerr << "error: rows do not match the event log\n";
    return 1;
  }
  prelude::write_effectiveness(result, c.out_dir);
  std::cout << "candidates=" << result.candidates << " safe=" << result.safe_candidates
            << " longest_chain=" << result.longest_chain << "\n";
  for (const auto& r : result.rows) {
    std::printf("%-8s t=%-4s rejected=%-6zu fp=%-6zu fn=%-4zu fp_rate=%.4f\n", r.detector.c_str(),
                prelude::threshold_label(r.threshold).c_str(), r.rejected, r.false_positives, r.false_negatives,
                r.fp_rate());
  }
  return 0;
}

int pathlen(const ExperimentConfig& c) {
  const auto result = prelude::run_pathlen(c);
  prelude::write_pathlen(result, c.out_dir);
  std::cout << "gr paths=" << result.gr.total << " random paths=" << result.random.total << "\n";
  return 0;
}

int microbench(const ExperimentConfig& c) {
  const auto rows = prelude::run_microbench(c);
  prelude::write_microbench(rows, c.out_dir);
  for (const auto& r : rows) {
    std::printf("%-3s k=%-5u delay=%-5s rounds=%-3u setup=%zuB online=%zuB wall=%.2fms\n",
                prelude::to_string(r.backend), r.k, r.delay.c_str(), r.online_rounds, r.setup_bytes,
                r.online_bytes, r.wall_mean_ms);
  }
  return 0;
}

int verify_fixture(const ExperimentConfig& c) {
  const auto steps = prelude::run_fixture(c);
  prelude::write_fixture(steps, c.out_dir);
  bool ok = true;
  for (const auto& s : steps) {
    std::printf("%s %zu %-28s %-17s %s\n", s.ok() ? "ok  " : "FAIL", s.step, s.action.c_str(), s.detector.c_str(),
                s.verdict.c_str());
    ok = ok && s.ok();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prelude loop-detection experiments"};
  app.require_subcommand(1);
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "INI experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out", out_dir, "output directory");
  };
  auto* eff = app.add_subcommand("effectiveness", "false-positive rates per detector and threshold");
  auto* path = app.add_subcommand("pathlen", "CDF of SDXes per deflected path");
  auto* bench = app.add_subcommand("microbench", "secure query rounds, bytes and time");
  auto* fixture = app.add_subcommand("verify-fixture", "two-SDX walkthrough");
  for (auto* sub : {eff, path, bench, fixture}) add_common(sub);
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config = prelude::load_config(config_file, seed);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (eff->parsed()) return effectiveness(config);
    if (path->parsed()) return pathlen(config);
    if (bench->parsed()) return microbench(config);
    return verify_fixture(config);
  } catch (const prelude::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
