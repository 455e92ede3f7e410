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

#include "prelude/harness.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "prelude/errors.hpp"

namespace prelude {
namespace {

ExperimentConfig parse(const std::string& text, std::optional<std::uint64_t> seed = std::nullopt) {
  std::istringstream in(text);
  return parse_config(in, seed);
}

ExperimentConfig tiny(std::uint64_t seed) {
  return parse(
      "seed = " + std::to_string(seed) +
      "\nquery_engine = plaintext\n[topology]\nn_as = 30\nn_sdx = 4\n[prefixes]\ncount = 4\n"
      "[policy]\nport_min = 1\nport_max = 8\n[effectiveness]\nthresholds = 1, 2, 3\n");
}

TEST(ConfigTest, ParsesSections) {
  const auto c = parse(
      "seed = 9\nbackend = yao\ndelay = 10ms\n[topology]\nn_as = 70\npeer_ratio = 0.5\n"
      "[effectiveness]\nthresholds = 2, 4, inf\n[microbench]\nbackends = yao\nrule_counts = 1, 50\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.backend, Backend::kYao);
  EXPECT_EQ(c.topology.n_as, 70u);
  EXPECT_EQ(c.topology.seed, 9u);
  EXPECT_DOUBLE_EQ(c.topology.peer_ratio, 0.5);
  EXPECT_EQ(c.thresholds, (std::vector<std::size_t>{2, 4, kUnbounded}));
  EXPECT_EQ(c.bench_backends, std::vector<Backend>{Backend::kYao});
  EXPECT_EQ(c.bench_rule_counts, (std::vector<std::uint32_t>{1, 50}));
  EXPECT_EQ(delay_preset(c.delay), std::chrono::milliseconds{10});
}

TEST(ConfigTest, Errors) {
  EXPECT_THROW(parse("backend = gmw\n"), ConfigError);  // no seed
  EXPECT_THROW(parse("seed = 1\ncolor = red\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n[topology]\nn_as = many\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n[weather]\nrain = 1\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\ndelay = 5ms\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n[microbench]\ndelays = 1ms, 2ms\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\nbackend = ckks\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n[effectiveness]\nthresholds = 0\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n[policy]\nport_min = 9\nport_max = 3\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\n[policy]\nport_max = 70000\n"), ConfigError);
}

TEST(ConfigTest, SeedOverride) {
  EXPECT_EQ(parse("backend = gmw\n", 5).seed, 5u);
  EXPECT_EQ(parse("seed = 3\n", 5).policy.seed, 5u);
}

TEST(ConfigTest, ShippedConfigLoads) {
  const auto c = load_config(PRELUDE_SOURCE_DIR "/configs/small.ini");
  EXPECT_EQ(c.topology.n_as, 50u);
  EXPECT_EQ(c.n_prefixes, 20u);
}

TEST(CsvTest, Quoting) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  std::ostringstream out;
  CsvWriter(out).row({"x", "1,2", ""});
  EXPECT_EQ(out.str(), "x,\"1,2\",\r\n");
}

TEST(CsvTest, RoundTripProperty) {
  std::mt19937_64 rng(4);
  const std::string alphabet = "ab,\"\r\n 1";
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<std::string>> rows(1 + rng() % 4);
    const std::size_t cols = 1 + rng() % 4;
    for (auto& row : rows) {
      for (std::size_t c = 0; c < cols; ++c) {
        std::string f;
        for (std::size_t i = rng() % 6; i > 0; --i) f += alphabet[rng() % alphabet.size()];
        row.push_back(f);
      }
    }
    std::ostringstream out;
    CsvWriter w(out);
    for (const auto& row : rows) w.row(row);
    EXPECT_EQ(parse_csv(out.str()), rows);
  }
}

TEST(EffectivenessTest, RowsMatchEventLogAndInvariants) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto c = tiny(seed);
    const auto r = run_effectiveness(c);
    ASSERT_GT(r.candidates, 0u);
    EXPECT_EQ(derive_rows(r.events, "effectiveness"), r.rows);
    EXPECT_EQ(r.rows.size(), 3u * 4u);
    for (const auto& row : r.rows) {
      EXPECT_EQ(row.installed + row.rejected, row.candidates);
      EXPECT_EQ(row.true_loops + row.false_negatives, row.candidates - row.safe_candidates);
      EXPECT_EQ(row.false_negatives, 0u) << row.detector;
      if (row.detector == "oracle") EXPECT_EQ(row.false_positives, 0u);
    }
    for (std::size_t t : {std::size_t{1}, std::size_t{2}, std::size_t{3}, kUnbounded}) {
      EXPECT_LE(r.row("prelude", t).false_positives, r.row("sidr", t).false_positives);
    }
  }
}

TEST(EffectivenessTest, Deterministic) {
  const auto c = tiny(2);
  const auto a = run_effectiveness(c);
  const auto b = run_effectiveness(c);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.events, b.events);
}

TEST(EffectivenessTest, SmpcMatchesPlaintext) {
  auto c = tiny(3);
  c.max_candidates = 40;
  const auto plain = run_effectiveness(c);
  c.engine = QueryEngine::kSmpc;
  const auto secure = run_effectiveness(c);
  EXPECT_EQ(plain.rows, secure.rows);
}

TEST(FixtureTest, AllStepsPass) {
  const auto c = parse("seed = 1\n");
  for (const auto& s : run_fixture(c)) EXPECT_TRUE(s.ok()) << s.step << " " << s.action << " " << s.verdict;
}

TEST(PathlenTest, CurvesAreCdfs) {
  const auto r = run_pathlen(tiny(1));
  ASSERT_GT(r.gr.total, 0u);
  ASSERT_GT(r.random.total, 0u);
  EXPECT_GE(r.random.total, r.gr.total);
  for (const PathlenCurve* c : {&r.gr, &r.random}) {
    EXPECT_GE(c->histogram.begin()->first, 1u);
    double prev = 0;
    for (std::size_t n = 1; n <= 20; ++n) {
      EXPECT_GE(c->cdf(n), prev);
      prev = c->cdf(n);
    }
    EXPECT_DOUBLE_EQ(c->cdf(c->histogram.rbegin()->first), 1.0);
  }
}

TEST(PathlenTest, SdxCountOnFixture) {
  const auto f = two_sdx_fixture();
  // B -> A -> N -> Z crosses SDX 1 only; N -> M -> B -> Z only SDX 2.
  EXPECT_EQ(deflected_sdx_count(f.topo, f.rib, f.r_b), 1u);
  EXPECT_EQ(deflected_sdx_count(f.topo, f.rib, f.r_n), 1u);
}

TEST(MicrobenchTest, CountsAreStable) {
  const QuerySample g = measure_query(Backend::kGmw, 3, {}, 1);
  EXPECT_EQ(g.online_rounds, g.and_depth + 1);
  const QuerySample g2 = measure_query(Backend::kGmw, 3, {}, 2);
  EXPECT_EQ(g.setup_bytes, g2.setup_bytes);
  EXPECT_EQ(g.online_bytes, g2.online_bytes);
  const QuerySample y1 = measure_query(Backend::kYao, 1, {}, 1);
  const QuerySample y9 = measure_query(Backend::kYao, 9, {}, 1);
  EXPECT_EQ(y1.online_rounds, y9.online_rounds);
  EXPECT_LT(y1.online_bytes, y9.online_bytes);
}

TEST(MicrobenchTest, WritesCsv) {
  auto c = parse("seed = 1\n[microbench]\nrule_counts = 1, 4\ndelays = 1ms\nrepetitions = 2\n");
  const auto rows = run_microbench(c);
  ASSERT_EQ(rows.size(), 4u);
  const auto dir = std::filesystem::temp_directory_path() / "prelude_microbench_test";
  write_microbench(rows, dir);
  std::ifstream in(dir / "microbench.csv", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto table = parse_csv(ss.str());
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0][0], "backend");
  EXPECT_EQ(table[1][0], "gmw");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace prelude
