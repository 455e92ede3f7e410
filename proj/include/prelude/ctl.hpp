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
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prelude/bgpsim.hpp"
#include "prelude/distinct_match.hpp"
#include "prelude/smpc.hpp"

namespace prelude {

enum class Decision : std::uint8_t { kAccept, kReject };
enum class Reason : std::uint8_t { kSafe, kLoopDetected, kBudgetExhausted, kQueryFailed, kRouteUnavailable };

std::string to_string(Decision d);
std::string to_string(Reason r);

struct Verdict {
  Decision decision = Decision::kAccept;
  Reason reason = Reason::kSafe;
  /// For loops: the SDX whose deflection closed the cycle. Nothing else about
  /// the remote chain is returned.
  std::optional<SdxId> closing_sdx;
  /// Longest chain of deflections followed, counting the policy itself.
  std::size_t max_chain = 0;
  std::size_t queries = 0;

  bool accepted() const { return decision == Decision::kAccept; }
  static Verdict accept(std::size_t chain = 1) { return {Decision::kAccept, Reason::kSafe, std::nullopt, chain, 0}; }
  static Verdict reject(Reason r, std::optional<SdxId> sdx = std::nullopt) {
    return {Decision::kReject, r, sdx, 0, 0};
  }
};

/// "accept", "reject:loop_detected@sdx3", ...
std::string to_string(const Verdict& v);

/// Budget large enough that exploration is never cut short.
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

struct VerifyRequest {
  AsId requester = 0;
  SdxId origin_sdx = 0;
  DeflectionPolicy policy;
  PrefixId prefix = 0;
  std::vector<std::pair<SdxId, AsId>> visited;
  /// Maximum number of successive deflections followed, the policy included.
  std::size_t budget = kUnbounded;

  static VerifyRequest for_policy(const DeflectionPolicy& p, std::size_t threshold);
};

/// Next hops an (sdx, owner) pair reports for the rule under verification.
/// May throw QueryAborted.
using HopSource = std::function<std::set<NextHopId>(SdxId sdx, AsId owner)>;

struct Exploration {
  Verdict verdict;
  /// Every (sdx, owner) pair consulted.
  std::set<std::pair<SdxId, AsId>> queried;
};

/// Path exploration shared by the Prelude verifier and the SIDR baseline.
/// The walk starts as requester followed by the deflect-to AS's path; every
/// AS on it may deflect at each SDX it belongs to. A hop back into the walk
/// is a loop; more deflections than the budget allows reject conservatively.
/// `prefetch` is called with all pairs of one walk level before they are read.
Exploration explore(const Topology& topo, const RibState& rib, const VerifyRequest& req, const HopSource& hops,
                    const std::function<void(const std::vector<std::pair<SdxId, AsId>>&)>& prefetch = {});

/// Exact per-header-class exploration with full knowledge of every rule, same
/// budget semantics. `active` is in installation order.
Verdict perfect_knowledge_check(const RibState& rib, const std::vector<DeflectionPolicy>& active,
                                const DeflectionPolicy& candidate, std::size_t threshold);

// --- Simulated network -----------------------------------------------------

enum class QueryEngine : std::uint8_t { kSmpc, kPlaintext };
std::string to_string(QueryEngine e);
QueryEngine parse_query_engine(std::string_view text);

struct NetworkOptions {
  Backend backend = Backend::kGmw;
  QueryEngine engine = QueryEngine::kSmpc;
  std::uint64_t seed = 1;
  std::chrono::microseconds one_way_delay{0};
  /// Concurrent secure sessions per walk level.
  std::size_t parallelism = 8;
};

/// One structured log line. Rule bits never appear: holders record only the
/// prefix and k of what they served.
struct Event {
  std::uint64_t time = 0;
  SdxId sdx = 0;
  std::string kind;
  PrefixId prefix = 0;
  std::optional<RuleId> rule;
  std::optional<std::uint32_t> k;
  std::string verdict;
  std::string detail;

  std::string to_line() const;
};

struct RemoveResult {
  bool found = false;
  std::size_t notified = 0;
  std::vector<std::pair<RuleId, Verdict>> reverified;
};

/// A change to one AS adjacency.
struct BgpChange {
  enum class Kind : std::uint8_t { kAddEdge, kRemoveEdge } kind = Kind::kRemoveEdge;
  Edge edge;
};

/// Per-SDX path verifiers over a shared simulated topology. Events are
/// processed one at a time; each verification may run several secure
/// sessions concurrently.
class Network {
 public:
  Network(Topology topo, std::map<PrefixId, AsId> origins, NetworkOptions options = {});
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const Topology& topology() const { return topo_; }
  const Ribs& ribs() const { return ribs_; }
  const RibState& rib(PrefixId prefix) const;
  const NetworkOptions& options() const { return options_; }

  /// Verifies and, on acceptance, registers the policy at its SDX and
  /// subscribes at every SDX consulted.
  Verdict handle_install(const DeflectionPolicy& policy, std::size_t threshold = kUnbounded);
  Verdict handle_install(const VerifyRequest& request);

  /// Verification only; nothing is registered.
  Verdict check(const DeflectionPolicy& policy, std::size_t threshold = kUnbounded);
  /// Match-agnostic baseline over the same state and budget.
  Verdict sidr_check(const DeflectionPolicy& policy, std::size_t threshold = kUnbounded);

  /// One verdict per threshold; queries are shared across thresholds.
  std::vector<Verdict> check_thresholds(const DeflectionPolicy& policy, const std::vector<std::size_t>& thresholds);
  std::vector<Verdict> sidr_check_thresholds(const DeflectionPolicy& policy,
                                             const std::vector<std::size_t>& thresholds);

  /// Queries to these SDXes fail as if the session broke.
  void set_unreachable(std::set<SdxId> sdxes) { unreachable_ = std::move(sdxes); }

  /// Registers without verification (used to replay a reference state).
  void admit(const DeflectionPolicy& policy);

  /// Unknown rules are a logged no-op.
  RemoveResult handle_remove(SdxId sdx, RuleId rule);

  /// Applies the change, recomputes routes and re-verifies every active rule
  /// whose deflected path changed. Rejected rules are deactivated. Rules are
  /// re-verified with the threshold they were installed with.
  std::vector<std::pair<RuleId, Verdict>> handle_bgp_update(const BgpChange& change);

  /// Active rules in installation order.
  std::vector<DeflectionPolicy> active_policies() const;
  std::vector<DeflectionPolicy> active_policies(PrefixId prefix) const;
  bool is_active(RuleId rule) const;
  std::size_t subscriber_count(SdxId sdx, PrefixId prefix, AsId owner) const;
  const RuleTable& table(SdxId sdx) const;

  const std::vector<Event>& log() const { return log_; }
  /// Frames exchanged for subscriptions and notifications.
  std::size_t control_frames() const { return control_frames_; }

 private:
  struct Node;
  struct Installed {
    DeflectionPolicy policy;
    std::uint64_t seq = 0;
    std::size_t threshold = kUnbounded;
  };

  Node& node(SdxId sdx);
  const Node& node(SdxId sdx) const;
  using QueryCache = std::map<std::pair<SdxId, AsId>, std::set<NextHopId>>;
  Exploration run_prelude(const VerifyRequest& req, QueryCache& cache);
  Exploration run_sidr(const VerifyRequest& req);
  void fill_cache(SdxId local, const DeflectionPolicy& policy, const std::vector<std::pair<SdxId, AsId>>& pairs,
                  QueryCache& cache);
  std::set<NextHopId> remote_query(SdxId holder, const DeflectionPolicy& policy, AsId owner, std::uint64_t nonce);
  void log_event(Event e);
  void send_control(SdxId from, SdxId to, MsgKind kind, const std::vector<std::uint8_t>& payload);
  void register_policy(const DeflectionPolicy& policy, std::size_t threshold,
                       const std::set<std::pair<SdxId, AsId>>& queried);
  /// Deregisters and notifies subscribers; returns the rules they hold.
  std::vector<RuleId> retract(RuleId rule, const std::string& kind, std::size_t* notified);
  std::vector<std::pair<RuleId, Verdict>> reverify(std::vector<RuleId> rules);

  Topology topo_;
  std::map<PrefixId, AsId> origins_;
  Ribs ribs_;
  NetworkOptions options_;
  TrustedDealer dealer_;
  std::map<SdxId, std::unique_ptr<Node>> nodes_;
  std::map<RuleId, Installed> installed_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t clock_ = 0;
  std::uint64_t nonce_counter_ = 0;
  std::size_t control_frames_ = 0;
  std::set<SdxId> unreachable_;
  std::vector<Event> log_;
};

}  // namespace prelude
