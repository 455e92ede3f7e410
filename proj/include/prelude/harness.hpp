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

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "prelude/bgpsim.hpp"
#include "prelude/ctl.hpp"

namespace prelude {

/// Named one-way delay presets: none, 1ms, 10ms, 100ms.
std::chrono::microseconds delay_preset(std::string_view name);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  TopologyParams topology = [] {
    TopologyParams t;
    t.n_as = 50;
    return t;
  }();
  std::size_t n_prefixes = 20;
  PolicyParams policy;
  /// `kUnbounded` is always evaluated in addition to these.
  std::vector<std::size_t> thresholds{1, 2, 3, 4, 6, 8, 13};
  /// Stop after this many arrivals (0 keeps all).
  std::size_t max_candidates = 0;
  Backend backend = Backend::kGmw;
  QueryEngine engine = QueryEngine::kSmpc;
  std::string delay = "none";
  std::size_t parallelism = 8;

  std::vector<std::uint32_t> bench_rule_counts{1, 50, 500, 5000};
  std::vector<std::string> bench_delays{"1ms", "10ms", "100ms"};
  std::vector<Backend> bench_backends{Backend::kGmw, Backend::kYao};
  std::size_t bench_repetitions = 50;

  std::filesystem::path out_dir = "out";

  /// Throws ConfigError.
  void validate() const;
};

/// INI text: top-level seed/backend/query_engine/delay/parallelism, then
/// [topology], [prefixes], [policy], [effectiveness], [microbench].
/// Unknown sections or keys are errors. A given `seed` overrides the file.
ExperimentConfig parse_config(std::istream& in, std::optional<std::uint64_t> seed = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& file, std::optional<std::uint64_t> seed = std::nullopt);

// --- CSV -------------------------------------------------------------------

/// Comma-separated, CRLF line ends, fields quoted when they hold a comma,
/// quote, CR or LF.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(&out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream* out_;
};

std::string csv_escape(const std::string& field);
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

std::string threshold_label(std::size_t t);

// --- Effectiveness ---------------------------------------------------------

struct ResultRow {
  std::string experiment;
  std::string detector;  // oracle | prelude | sidr
  std::size_t threshold = kUnbounded;
  std::size_t candidates = 0;
  std::size_t safe_candidates = 0;
  std::size_t installed = 0;
  std::size_t rejected = 0;
  std::size_t true_loops = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  /// Rejected safe rules over all safe rules.
  double fp_rate() const;
  /// Rejected safe rules over all candidates.
  double fp_rate_all() const;

  bool operator==(const ResultRow&) const = default;
};

struct EffectivenessResult {
  std::vector<ResultRow> rows;
  std::size_t candidates = 0;
  std::size_t safe_candidates = 0;
  /// Deepest deflection chain any unbounded verification followed.
  std::size_t longest_chain = 0;
  std::vector<std::string> events;

  const ResultRow& row(const std::string& detector, std::size_t threshold) const;
};

/// Replays one policy-arrival sequence against a common reference state:
/// each arrival is judged by every detector at every threshold, then joins
/// the reference state iff it creates no loop.
EffectivenessResult run_effectiveness(const ExperimentConfig& config);
EffectivenessResult run_effectiveness(const Topology& topo, const std::map<PrefixId, AsId>& origins,
                                      const std::vector<DeflectionPolicy>& arrivals,
                                      const ExperimentConfig& config, const std::string& experiment);

/// Recomputes the rows from the `evaluate` events of a log.
std::vector<ResultRow> derive_rows(const std::vector<std::string>& events, const std::string& experiment);

void write_effectiveness(const EffectivenessResult& result, const std::filesystem::path& dir);

// --- Path length -----------------------------------------------------------

struct PathlenCurve {
  std::string name;  // gr | random
  /// Path count per number of SDXes traversed.
  std::map<std::size_t, std::size_t> histogram;
  std::size_t total = 0;

  double cdf(std::size_t sdxes) const;
};

struct PathlenResult {
  PathlenCurve gr;
  PathlenCurve random;
};

/// Distinct SDXes crossed by a policy's deflected path.
std::size_t deflected_sdx_count(const Topology& topo, const RibState& rib, const DeflectionPolicy& p);

PathlenResult run_pathlen(const ExperimentConfig& config);
void write_pathlen(const PathlenResult& result, const std::filesystem::path& dir);

// --- Micro-benchmarks ------------------------------------------------------

struct MicrobenchRow {
  Backend backend = Backend::kGmw;
  std::uint32_t k = 0;
  std::string delay;
  std::size_t repetitions = 0;
  std::uint32_t and_depth = 0;
  std::uint32_t online_rounds = 0;
  std::size_t setup_bytes = 0;
  std::size_t online_bytes = 0;
  double wall_mean_ms = 0;
  double wall_stdev_ms = 0;
  double online_mean_ms = 0;
  double online_stdev_ms = 0;
};

/// One secure query against a holder of k entries.
struct QuerySample {
  std::uint32_t and_depth = 0;
  std::uint32_t online_rounds = 0;
  std::size_t setup_bytes = 0;
  std::size_t online_bytes = 0;
  double wall_ms = 0;
  double online_ms = 0;
};

QuerySample measure_query(Backend backend, std::uint32_t k, std::chrono::microseconds delay, std::uint64_t seed);

std::vector<MicrobenchRow> run_microbench(const ExperimentConfig& config);
void write_microbench(const std::vector<MicrobenchRow>& rows, const std::filesystem::path& dir);

// --- Fixture ---------------------------------------------------------------

struct FixtureStep {
  std::size_t step = 0;
  std::string action;
  std::string detector;
  std::string verdict;
  std::string expected;

  bool ok() const { return verdict == expected; }
};

/// The two-SDX walkthrough: r_B, then r_N, an SSH variant, removal, retry.
std::vector<FixtureStep> run_fixture(const ExperimentConfig& config);
void write_fixture(const std::vector<FixtureStep>& steps, const std::filesystem::path& dir);

}  // namespace prelude
