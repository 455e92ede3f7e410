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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "prelude/circuits.hpp"
#include "prelude/distinct_match.hpp"
#include "prelude/errors.hpp"
#include "prelude/prg.hpp"

namespace prelude {

namespace pt = boost::property_tree;

std::chrono::microseconds delay_preset(std::string_view name) {
  using std::chrono::milliseconds;
  if (name == "none") return std::chrono::microseconds{0};
  if (name == "1ms") return milliseconds{1};
  if (name == "10ms") return milliseconds{10};
  if (name == "100ms") return milliseconds{100};
  throw ConfigError("unknown delay preset '" + std::string(name) + "' (none, 1ms, 10ms, 100ms)");
}

// --- Config ----------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError("bad value for " + key + ": '" + raw + "'");
  }
  return value;
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t parse_threshold(const std::string& key, const std::string& raw) {
  if (trim(raw) == "inf") return kUnbounded;
  return parse_number<std::size_t>(key, raw);
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad value for " + key + ": '" + raw + "'");
}

Backend backend_value(const std::string& key, const std::string& raw) {
  try {
    return parse_backend(trim(raw));
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + raw + "' (gmw, yao)");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seed == 0) throw ConfigError("seed is required (config key or --seed) and must be nonzero");
  if (n_prefixes == 0) throw ConfigError("prefixes.count must be positive");
  if (topology.n_as < 2) throw ConfigError("topology.n_as must be at least 2");
  if (thresholds.empty()) throw ConfigError("effectiveness.thresholds is empty");
  for (std::size_t t : thresholds) {
    if (t == 0) throw ConfigError("thresholds must be positive");
  }
  if (parallelism == 0) throw ConfigError("parallelism must be positive");
  delay_preset(delay);
  for (const auto& d : bench_delays) delay_preset(d);
  for (std::uint32_t k : bench_rule_counts) {
    if (k == 0) throw ConfigError("microbench.rule_counts must be positive");
  }
  if (bench_repetitions == 0) throw ConfigError("microbench.repetitions must be positive");
  if (policy.min_per_target == 0 || policy.min_per_target > policy.max_per_target) {
    throw ConfigError("policy per-target range is empty");
  }
  if (policy.port_min > policy.port_max) throw ConfigError("policy port range is empty");
  if (!(policy.target_fraction > 0 && policy.target_fraction <= 1)) {
    throw ConfigError("policy.target_fraction must be in (0, 1]");
  }
  if (topology.sdx_min_members < 2 || topology.sdx_min_members > topology.sdx_max_members) {
    throw ConfigError("topology SDX member range is invalid");
  }
}

ExperimentConfig parse_config(std::istream& in, std::optional<std::uint64_t> seed) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [name, node] : tree) {
    const std::string& value = node.data();
    if (node.empty()) {
      if (name == "seed") {
        c.seed = parse_number<std::uint64_t>(name, value);
      } else if (name == "backend") {
        c.backend = backend_value(name, value);
      } else if (name == "query_engine") {
        try {
          c.engine = parse_query_engine(trim(value));
        } catch (const InvalidInput&) {
          throw ConfigError("bad value for query_engine: '" + value + "' (smpc, plaintext)");
        }
      } else if (name == "delay") {
        c.delay = trim(value);
      } else if (name == "parallelism") {
        c.parallelism = parse_number<std::size_t>(name, value);
      } else {
        throw ConfigError("unknown key '" + name + "'");
      }
      continue;
    }
    for (const auto& [key, child] : node) {
      const std::string full = name + "." + key;
      const std::string& v = child.data();
      if (name == "topology") {
        auto& t = c.topology;
        if (key == "n_as") t.n_as = parse_number<std::size_t>(full, v);
        else if (key == "n_sdx") t.n_sdx = parse_number<std::size_t>(full, v);
        else if (key == "n_tier1") t.n_tier1 = parse_number<std::size_t>(full, v);
        else if (key == "min_providers") t.min_providers = parse_number<std::size_t>(full, v);
        else if (key == "max_providers") t.max_providers = parse_number<std::size_t>(full, v);
        else if (key == "peer_ratio") t.peer_ratio = parse_number<double>(full, v);
        else if (key == "sdx_min_members") t.sdx_min_members = parse_number<std::size_t>(full, v);
        else if (key == "sdx_max_members") t.sdx_max_members = parse_number<std::size_t>(full, v);
        else throw ConfigError("unknown key '" + full + "'");
      } else if (name == "prefixes") {
        if (key == "count") c.n_prefixes = parse_number<std::size_t>(full, v);
        else throw ConfigError("unknown key '" + full + "'");
      } else if (name == "policy") {
        auto& p = c.policy;
        if (key == "target_fraction") p.target_fraction = parse_number<double>(full, v);
        else if (key == "max_targets") p.max_targets = parse_number<std::size_t>(full, v);
        else if (key == "min_per_target") p.min_per_target = parse_number<std::size_t>(full, v);
        else if (key == "max_per_target") p.max_per_target = parse_number<std::size_t>(full, v);
        else if (key == "port_min") p.port_min = parse_number<std::uint16_t>(full, v);
        else if (key == "port_max") p.port_max = parse_number<std::uint16_t>(full, v);
        else if (key == "gr_only") p.gr_only = parse_bool(full, v);
        else throw ConfigError("unknown key '" + full + "'");
      } else if (name == "effectiveness") {
        if (key == "thresholds") {
          c.thresholds.clear();
          for (const auto& item : split_list(v)) c.thresholds.push_back(parse_threshold(full, item));
        } else if (key == "max_candidates") {
          c.max_candidates = parse_number<std::size_t>(full, v);
        } else {
          throw ConfigError("unknown key '" + full + "'");
        }
      } else if (name == "microbench") {
        if (key == "rule_counts") {
          c.bench_rule_counts.clear();
          for (const auto& item : split_list(v)) c.bench_rule_counts.push_back(parse_number<std::uint32_t>(full, item));
        } else if (key == "delays") {
          c.bench_delays = split_list(v);
        } else if (key == "backends") {
          c.bench_backends.clear();
          for (const auto& item : split_list(v)) c.bench_backends.push_back(backend_value(full, item));
        } else if (key == "repetitions") {
          c.bench_repetitions = parse_number<std::size_t>(full, v);
        } else {
          throw ConfigError("unknown key '" + full + "'");
        }
      } else {
        throw ConfigError("unknown section [" + name + "]");
      }
    }
  }
  if (seed) c.seed = *seed;
  c.topology.seed = c.seed;
  c.policy.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file, std::optional<std::uint64_t> seed) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  return parse_config(in, seed);
}

// --- CSV -------------------------------------------------------------------

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) *out_ << ',';
    *out_ << csv_escape(fields[i]);
  }
  *out_ << "\r\n";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    any = true;
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += ch;
    }
  }
  if (quoted) throw InvalidInput("unterminated quoted CSV field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string threshold_label(std::size_t t) { return t == kUnbounded ? "inf" : std::to_string(t); }

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + (dir / name).string());
  return out;
}

}  // namespace

// --- Effectiveness ---------------------------------------------------------

double ResultRow::fp_rate() const {
  return static_cast<double>(false_positives) / static_cast<double>(std::max<std::size_t>(1, safe_candidates));
}

double ResultRow::fp_rate_all() const {
  return static_cast<double>(false_positives) / static_cast<double>(std::max<std::size_t>(1, candidates));
}

const ResultRow& EffectivenessResult::row(const std::string& detector, std::size_t threshold) const {
  for (const auto& r : rows) {
    if (r.detector == detector && r.threshold == threshold) return r;
  }
  throw InvalidInput("no row for " + detector + " at threshold " + threshold_label(threshold));
}

namespace {

std::vector<std::size_t> evaluated_thresholds(const ExperimentConfig& config) {
  std::set<std::size_t> ts(config.thresholds.begin(), config.thresholds.end());
  ts.insert(kUnbounded);
  return {ts.begin(), ts.end()};
}

void tally(ResultRow& row, bool safe, bool accepted) {
  if (accepted) {
    ++row.installed;
    if (!safe) ++row.false_negatives;
  } else {
    ++row.rejected;
    if (safe) {
      ++row.false_positives;
    } else {
      ++row.true_loops;
    }
  }
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.experiment, a.detector, a.threshold) < std::tie(b.experiment, b.detector, b.threshold);
  });
}

std::string field_of(const std::string& line, const std::string& key) {
  const std::string needle = key + "=";
  std::size_t pos = 0;
  while ((pos = line.find(needle, pos)) != std::string::npos) {
    if (pos == 0 || line[pos - 1] == ' ' || line[pos - 1] == '=') {
      const auto start = pos + needle.size();
      return line.substr(start, line.find(' ', start) - start);
    }
    pos += needle.size();
  }
  return {};
}

}  // namespace

EffectivenessResult run_effectiveness(const Topology& topo, const std::map<PrefixId, AsId>& origins,
                                      const std::vector<DeflectionPolicy>& arrivals,
                                      const ExperimentConfig& config, const std::string& experiment) {
  NetworkOptions options;
  options.backend = config.backend;
  options.engine = config.engine;
  options.seed = config.seed;
  options.one_way_delay = delay_preset(config.delay);
  options.parallelism = config.parallelism;
  Network net(topo, origins, options);

  const auto thresholds = evaluated_thresholds(config);
  const std::vector<std::string> detectors{"oracle", "prelude", "sidr"};
  std::map<std::pair<std::string, std::size_t>, ResultRow> rows;
  for (const auto& d : detectors) {
    for (std::size_t t : thresholds) rows[{d, t}] = ResultRow{experiment, d, t};
  }

  EffectivenessResult result;
  std::uint64_t clock = 0;
  for (const DeflectionPolicy& p : arrivals) {
    const RibState& rib = net.rib(p.prefix);
    const auto active = net.active_policies(p.prefix);
    const bool safe = loops_with(net.topology().graph, rib, active, p).empty();
    ++result.candidates;
    if (safe) ++result.safe_candidates;

    std::map<std::string, std::vector<Verdict>> verdicts;
    const Verdict oracle = perfect_knowledge_check(rib, active, p, kUnbounded);
    verdicts["oracle"].assign(thresholds.size(), oracle);
    verdicts["prelude"] = net.check_thresholds(p, thresholds);
    verdicts["sidr"] = net.sidr_check_thresholds(p, thresholds);
    result.longest_chain = std::max(result.longest_chain, verdicts["prelude"].back().max_chain);

    for (const auto& d : detectors) {
      for (std::size_t i = 0; i < thresholds.size(); ++i) {
        const Verdict& v = verdicts[d][i];
        tally(rows[{d, thresholds[i]}], safe, v.accepted());
        Event e{++clock, p.sdx, "evaluate", p.prefix, p.id, std::nullopt, to_string(v),
                "detector=" + d + " threshold=" + threshold_label(thresholds[i]) +
                    " truth=" + (safe ? "safe" : "loop")};
        result.events.push_back(e.to_line());
      }
    }
    if (safe) net.admit(p);
  }
  for (auto& [key, row] : rows) {
    row.candidates = result.candidates;
    row.safe_candidates = result.safe_candidates;
    result.rows.push_back(row);
  }
  sort_rows(result.rows);
  std::vector<std::string> merged;
  merged.reserve(net.log().size() + result.events.size());
  for (const auto& e : net.log()) merged.push_back(e.to_line());
  merged.insert(merged.end(), result.events.begin(), result.events.end());
  result.events = std::move(merged);
  return result;
}

EffectivenessResult run_effectiveness(const ExperimentConfig& config) {
  config.validate();
  const Topology topo = generate_topology(config.topology);
  const auto origins = choose_prefixes(topo.graph, config.n_prefixes, config.seed);
  const Ribs ribs = compute_all_routes(topo.graph, origins);
  auto policies = generate_policies(topo, ribs, config.policy).policies;
  Prg rng(Prg::derive({config.seed, 0xa221}));
  const auto order = rng.permutation(policies.size());
  std::vector<DeflectionPolicy> arrivals;
  arrivals.reserve(policies.size());
  for (std::size_t i : order) arrivals.push_back(policies[i]);
  if (config.max_candidates && arrivals.size() > config.max_candidates) arrivals.resize(config.max_candidates);
  return run_effectiveness(topo, origins, arrivals, config, "effectiveness");
}

std::vector<ResultRow> derive_rows(const std::vector<std::string>& events, const std::string& experiment) {
  std::map<std::pair<std::string, std::size_t>, ResultRow> rows;
  std::set<std::pair<PrefixId, RuleId>> seen;
  std::set<std::pair<PrefixId, RuleId>> safe;
  for (const auto& line : events) {
    if (field_of(line, "kind") != "evaluate") continue;
    const std::string detector = field_of(line, "detector");
    const std::string label = field_of(line, "threshold");
    const std::size_t threshold = label == "inf" ? kUnbounded : std::stoull(label);
    const bool is_safe = field_of(line, "truth") == "safe";
    const std::pair<PrefixId, RuleId> id{static_cast<PrefixId>(std::stoul(field_of(line, "prefix"))),
                                         std::stoull(field_of(line, "rule"))};
    seen.insert(id);
    if (is_safe) safe.insert(id);
    auto [it, fresh] = rows.try_emplace({detector, threshold}, ResultRow{experiment, detector, threshold});
    tally(it->second, is_safe, field_of(line, "verdict") == "accept");
  }
  std::vector<ResultRow> out;
  for (auto& [key, row] : rows) {
    row.candidates = seen.size();
    row.safe_candidates = safe.size();
    out.push_back(row);
  }
  sort_rows(out);
  return out;
}

void write_effectiveness(const EffectivenessResult& result, const std::filesystem::path& dir) {
  {
    auto out = open_out(dir, "effectiveness.csv");
    CsvWriter csv(out);
    csv.row({"experiment", "detector", "threshold", "candidates", "safe_candidates", "installed", "rejected",
             "true_loops", "false_positives", "false_negatives", "fp_rate", "fp_rate_all"});
    for (const auto& r : result.rows) {
      csv.row({r.experiment, r.detector, threshold_label(r.threshold), std::to_string(r.candidates),
               std::to_string(r.safe_candidates), std::to_string(r.installed), std::to_string(r.rejected),
               std::to_string(r.true_loops), std::to_string(r.false_positives), std::to_string(r.false_negatives),
               fixed(r.fp_rate()), fixed(r.fp_rate_all())});
    }
  }
  {
    auto out = open_out(dir, "effectiveness_summary.csv");
    CsvWriter csv(out);
    csv.row({"metric", "value"});
    csv.row({"candidates", std::to_string(result.candidates)});
    csv.row({"safe_candidates", std::to_string(result.safe_candidates)});
    csv.row({"longest_chain", std::to_string(result.longest_chain)});
  }
  auto log = open_out(dir, "effectiveness_events.log");
  for (const auto& line : result.events) log << line << '\n';
}

// --- Path length -----------------------------------------------------------

double PathlenCurve::cdf(std::size_t sdxes) const {
  if (total == 0) return 1.0;
  std::size_t below = 0;
  for (const auto& [n, count] : histogram) {
    if (n <= sdxes) below += count;
  }
  return static_cast<double>(below) / static_cast<double>(total);
}

std::size_t deflected_sdx_count(const Topology& topo, const RibState& rib, const DeflectionPolicy& p) {
  const auto sdxes = traversed_sdxes(deflected_path(p, rib), topo.sites);
  std::set<SdxId> distinct(sdxes.begin(), sdxes.end());
  distinct.insert(p.sdx);
  return distinct.size();
}

PathlenResult run_pathlen(const ExperimentConfig& config) {
  config.validate();
  const Topology topo = generate_topology(config.topology);
  const auto origins = choose_prefixes(topo.graph, config.n_prefixes, config.seed);
  const Ribs ribs = compute_all_routes(topo.graph, origins);
  PathlenResult out;
  out.gr.name = "gr";
  out.random.name = "random";
  for (bool gr : {true, false}) {
    PolicyParams params = config.policy;
    params.gr_only = gr;
    PathlenCurve& curve = gr ? out.gr : out.random;
    for (const auto& p : generate_policies(topo, ribs, params).policies) {
      ++curve.histogram[deflected_sdx_count(topo, ribs.at(p.prefix), p)];
      ++curve.total;
    }
  }
  return out;
}

void write_pathlen(const PathlenResult& result, const std::filesystem::path& dir) {
  std::size_t max_n = 1;
  for (const PathlenCurve* c : {&result.gr, &result.random}) {
    if (!c->histogram.empty()) max_n = std::max(max_n, c->histogram.rbegin()->first);
  }
  auto out = open_out(dir, "pathlen.csv");
  CsvWriter csv(out);
  csv.row({"curve", "sdx_count", "paths", "cdf"});
  for (const PathlenCurve* c : {&result.gr, &result.random}) {
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto it = c->histogram.find(n);
      csv.row({c->name, std::to_string(n), std::to_string(it == c->histogram.end() ? 0 : it->second),
               fixed(c->cdf(n))});
    }
  }
}

// --- Micro-benchmarks ------------------------------------------------------

namespace {

std::uint32_t batch_depth(std::uint32_t k) {
  static std::mutex mu;
  static std::map<std::uint32_t, std::uint32_t> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(k);
  if (it == cache.end()) it = cache.emplace(k, build_batch_query({k, 104, kHopIdWidth}).and_depth()).first;
  return it->second;
}

TernaryRule random_wide_rule(Prg& rng) {
  BitVector pattern(104), mask(104);
  for (std::size_t i = 0; i < 104; ++i) {
    if (rng.uniform(4) == 0) {
      mask.set(i, true);
      pattern.set(i, rng.bit());
    }
  }
  return TernaryRule(pattern, mask);
}

std::pair<double, double> mean_stdev(const std::vector<double>& xs) {
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0;
  return {mean, std::sqrt(var)};
}

}  // namespace

QuerySample measure_query(Backend backend, std::uint32_t k, std::chrono::microseconds delay, std::uint64_t seed) {
  Prg rng(Prg::derive({seed, k, 0xb3c4}));
  RuleTable holder;
  for (std::uint32_t i = 0; i < k; ++i) {
    holder.register_entry({i + 1, random_wide_rule(rng), NextHopId{1, 1000 + i}, 7, 1});
  }
  const TernaryRule local = random_wide_rule(rng);
  const TrustedDealer dealer(Prg::derive({seed, 0xdea1}).lo);
  QueryOptions opts;
  opts.backend = backend;
  opts.nonce = rng.next_u64();
  opts.querier_seed = rng.next_u64();
  const auto start = std::chrono::steady_clock::now();
  auto [q, trace] = detail::query_in_process_with_trace(holder, local, 1, AsId{7}, dealer, opts, rng.next_u64(), delay);
  const auto wall = std::chrono::steady_clock::now() - start;

  QuerySample s;
  s.and_depth = batch_depth(k);
  s.online_rounds = q.querier_transcript.online_rounds();
  s.setup_bytes = q.querier_transcript.bytes(Phase::kSetup) + q.holder.transcript.bytes(Phase::kSetup, Direction::kFromDealer);
  s.online_bytes = q.querier_transcript.bytes(Phase::kOnline);
  s.wall_ms = std::chrono::duration<double, std::milli>(wall).count();
  s.online_ms = std::chrono::duration<double, std::milli>(trace.online_time).count();
  return s;
}

std::vector<MicrobenchRow> run_microbench(const ExperimentConfig& config) {
  config.validate();
  std::vector<MicrobenchRow> rows;
  for (Backend backend : config.bench_backends) {
    for (std::uint32_t k : config.bench_rule_counts) {
      for (const auto& delay : config.bench_delays) {
        MicrobenchRow row;
        row.backend = backend;
        row.k = k;
        row.delay = delay;
        row.repetitions = config.bench_repetitions;
        std::vector<double> wall, online;
        for (std::size_t rep = 0; rep < config.bench_repetitions; ++rep) {
          const QuerySample s = measure_query(backend, k, delay_preset(delay), config.seed + rep);
          if (rep == 0) {
            row.and_depth = s.and_depth;
            row.online_rounds = s.online_rounds;
            row.setup_bytes = s.setup_bytes;
            row.online_bytes = s.online_bytes;
          } else if (s.online_rounds != row.online_rounds || s.setup_bytes != row.setup_bytes ||
                     s.online_bytes != row.online_bytes) {
            throw EvaluationError("round or byte counts varied across repetitions");
          }
          wall.push_back(s.wall_ms);
          online.push_back(s.online_ms);
        }
        std::tie(row.wall_mean_ms, row.wall_stdev_ms) = mean_stdev(wall);
        std::tie(row.online_mean_ms, row.online_stdev_ms) = mean_stdev(online);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_microbench(const std::vector<MicrobenchRow>& rows, const std::filesystem::path& dir) {
  auto out = open_out(dir, "microbench.csv");
  CsvWriter csv(out);
  csv.row({"backend", "k", "delay", "repetitions", "and_depth", "online_rounds", "setup_bytes", "online_bytes",
           "wall_mean_ms", "wall_stdev_ms", "online_mean_ms", "online_stdev_ms"});
  for (const auto& r : rows) {
    csv.row({to_string(r.backend), std::to_string(r.k), r.delay, std::to_string(r.repetitions),
             std::to_string(r.and_depth), std::to_string(r.online_rounds), std::to_string(r.setup_bytes),
             std::to_string(r.online_bytes), fixed(r.wall_mean_ms, 3), fixed(r.wall_stdev_ms, 3),
             fixed(r.online_mean_ms, 3), fixed(r.online_stdev_ms, 3)});
  }
}

// --- Fixture ---------------------------------------------------------------

std::vector<FixtureStep> run_fixture(const ExperimentConfig& config) {
  using F = TwoSdxFixture;
  const auto f = two_sdx_fixture();
  NetworkOptions options;
  options.backend = config.backend;
  options.engine = config.engine;
  options.seed = config.seed;
  options.one_way_delay = delay_preset(config.delay);
  Network net(f.topo, {{F::kPrefix, F::kZ}}, options);

  auto ssh = f.r_n;
  ssh.id = 3;
  FlowSpec spec;
  spec.ip_proto = kProtoTcp;
  spec.dst_port = 22;
  ssh.rule = encode(spec);

  std::vector<FixtureStep> steps;
  auto add = [&](std::string action, std::string detector, std::string verdict, std::string expected) {
    steps.push_back({steps.size() + 1, std::move(action), std::move(detector), std::move(verdict),
                     std::move(expected)});
  };
  const std::string loop1 = "reject:loop_detected@sdx1";
  add("install r_B", "sidr", to_string(net.sidr_check(f.r_b)), "accept");
  add("install r_B", "prelude", to_string(net.handle_install(f.r_b)), "accept");
  add("install r_N (dst_port=80)", "sidr", to_string(net.sidr_check(f.r_n)), loop1);
  add("install r_N (dst_port=80)", "prelude", to_string(net.handle_install(f.r_n)), loop1);
  add("install r_N (dst_port=22)", "sidr", to_string(net.sidr_check(ssh)), loop1);
  add("install r_N (dst_port=22)", "prelude", to_string(net.check(ssh)), "accept");
  const RemoveResult removed = net.handle_remove(F::kSdx1, f.r_b.id);
  add("remove r_B", "prelude", removed.found ? "removed" : "unknown", "removed");
  add("retry r_N (dst_port=80)", "prelude", to_string(net.handle_install(f.r_n)), "accept");
  const bool loops = !forwarding_oracle(net.topology().graph, net.rib(F::kPrefix), net.active_policies(),
                                        F::kPrefix).empty();
  add("active rules", "forwarding_oracle", loops ? "loop" : "loop_free", "loop_free");

  ExperimentConfig replay = config;
  replay.thresholds = {kUnbounded};
  const auto eff = run_effectiveness(f.topo, {{F::kPrefix, F::kZ}}, {f.r_b, f.r_n}, replay, "fixture");
  add("replay r_B, r_N", "prelude", "rejected=" + std::to_string(eff.row("prelude", kUnbounded).rejected),
      "rejected=1");
  const std::size_t sidr = eff.row("sidr", kUnbounded).rejected;
  add("replay r_B, r_N", "sidr", sidr >= 1 ? "rejected>=1" : "rejected=0", "rejected>=1");
  return steps;
}

void write_fixture(const std::vector<FixtureStep>& steps, const std::filesystem::path& dir) {
  auto out = open_out(dir, "fixture.csv");
  CsvWriter csv(out);
  csv.row({"step", "action", "detector", "verdict", "expected", "ok"});
  for (const auto& s : steps) {
    csv.row({std::to_string(s.step), s.action, s.detector, s.verdict, s.expected, s.ok() ? "true" : "false"});
  }
}

}  // namespace prelude
