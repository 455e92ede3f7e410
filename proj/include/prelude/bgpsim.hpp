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

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prelude/rulespace.hpp"
#include "prelude/types.hpp"

namespace prelude {

// --- Topology --------------------------------------------------------------

/// Role of a neighbour as seen from the AS asking.
enum class Rel : std::uint8_t { kCustomer, kPeer, kProvider };

enum class EdgeKind : std::uint8_t { kCustomerProvider, kPeer };

/// For kCustomerProvider, `a` is the customer and `b` the provider.
struct Edge {
  AsId a = 0;
  AsId b = 0;
  EdgeKind kind = EdgeKind::kPeer;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class AsGraph {
 public:
  void add_as(AsId as);
  void add_customer_provider(AsId customer, AsId provider);
  void add_peer(AsId a, AsId b);
  void add_edge(const Edge& edge);
  /// Removes the edge between a and b, returning it if there was one.
  std::optional<Edge> remove_edge(AsId a, AsId b);

  bool has_as(AsId as) const { return as_ids_.count(as) != 0; }
  const std::set<AsId>& as_ids() const { return as_ids_; }
  std::size_t size() const { return as_ids_.size(); }
  /// What v is to u, if they share an edge.
  std::optional<Rel> relation(AsId u, AsId v) const;
  /// Neighbours in ascending id order.
  std::vector<AsId> neighbors(AsId u) const;
  std::vector<AsId> neighbors(AsId u, Rel rel) const;
  std::vector<Edge> edges() const;

  /// Throws InvalidInput if the customer-provider relation has a cycle.
  void validate() const;

 private:
  void add_relation(AsId u, AsId v, Rel rel);
  void check_new_edge(AsId a, AsId b) const;

  std::set<AsId> as_ids_;
  std::map<AsId, std::map<AsId, Rel>> adj_;
};

struct SdxSite {
  SdxId id = 0;
  std::set<AsId> members;
};

struct Topology {
  AsGraph graph;
  std::vector<SdxSite> sites;

  const SdxSite& site(SdxId id) const;
  bool is_member(SdxId sdx, AsId as) const;
  /// SDXes the AS belongs to, ascending.
  std::vector<SdxId> sites_of(AsId as) const;
  /// Throws InvalidInput on duplicate ids, sites with fewer than two members
  /// or members missing from the graph.
  void validate() const;
};

struct TopologyParams {
  std::size_t n_as = 200;
  std::size_t n_sdx = 10;
  std::size_t n_tier1 = 5;
  std::size_t min_providers = 1;
  std::size_t max_providers = 2;
  /// Extra random peer links, as a fraction of n_as.
  double peer_ratio = 0.2;
  std::size_t sdx_min_members = 3;
  std::size_t sdx_max_members = 12;
  std::uint64_t seed = 1;
};

/// ASes are numbered 1..n_as; lower ids sit higher in the hierarchy. Members
/// of an SDX without an existing relationship are connected as peers.
Topology generate_topology(const TopologyParams& params);

/// `a|b|-1` (a is provider of b) and `a|b|0` (peers). Extra fields after the
/// third are ignored; `#` starts a comment.
AsGraph parse_as_relationships(std::istream& in);
/// `sdx_id: as1,as2,...` per line.
std::vector<SdxSite> parse_sdx_sites(std::istream& in);
void write_as_relationships(std::ostream& out, const AsGraph& graph);
void write_sdx_sites(std::ostream& out, const std::vector<SdxSite>& sites);

// --- Routes ----------------------------------------------------------------

enum class RouteClass : std::uint8_t { kSelf, kCustomer, kPeer, kProvider };
std::string to_string(RouteClass cls);

struct Route {
  std::vector<AsId> path;  // starts at the selecting AS, ends at the origin
  AsId next_hop = 0;       // the AS itself for the origin
  RouteClass cls = RouteClass::kSelf;
  friend bool operator==(const Route&, const Route&) = default;
};

struct RibState {
  PrefixId prefix = 0;
  AsId origin = 0;
  std::map<AsId, Route> routes;

  const Route* route(AsId as) const;
};

/// Gao-Rexford selection: customer > peer > provider routes, then shortest
/// path, then lowest next-hop id. Export is valley-free.
RibState compute_routes(const AsGraph& graph, PrefixId prefix, AsId origin);

using Ribs = std::map<PrefixId, RibState>;
Ribs compute_all_routes(const AsGraph& graph, const std::map<PrefixId, AsId>& origins);

/// Distinct origin ASes drawn uniformly; prefix ids are 1..n.
std::map<PrefixId, AsId> choose_prefixes(const AsGraph& graph, std::size_t n, std::uint64_t seed);

/// Whether a route of class `cls` is announced to a neighbour that is `to`
/// from the announcer's point of view.
bool exports(RouteClass cls, Rel to);

/// up* peer? down*, every hop an existing edge.
bool is_valley_free(const AsGraph& graph, const std::vector<AsId>& path);

/// SDX s appears at position i iff path[i] and path[i+1] are both members;
/// several SDXes at one position are listed in ascending id order.
std::vector<SdxId> traversed_sdxes(const std::vector<AsId>& path, const std::vector<SdxSite>& sites);

// --- Deflections -----------------------------------------------------------

struct DeflectionPolicy {
  RuleId id = 0;
  AsId owner = 0;
  SdxId sdx = 0;
  TernaryRule rule;
  AsId deflect_to = 0;
  PrefixId prefix = 0;
  friend bool operator==(const DeflectionPolicy&, const DeflectionPolicy&) = default;
};

std::string to_string(const DeflectionPolicy& policy);

/// y announces a route for the prefix to u that u would not otherwise use:
/// they share an edge, y's route is exported to u, avoids u and y is not u's
/// BGP next hop. The origin never deflects.
bool deflection_available(const AsGraph& graph, const RibState& rib, AsId u, AsId y);

/// Membership and availability; throws InvalidInput with the reason.
void validate_policy(const Topology& topo, const RibState& rib, const DeflectionPolicy& policy);

/// Available, the neighbour sits in the same preference class as the route u
/// selected through BGP, and u followed by the neighbour's path is valley-free.
bool gr_compliant(const DeflectionPolicy& policy, const RibState& rib, const AsGraph& graph);

/// The path traffic takes when `owner` deflects it: owner then path(deflect_to).
std::vector<AsId> deflected_path(const DeflectionPolicy& policy, const RibState& rib);

struct PolicyParams {
  std::uint64_t seed = 1;
  double target_fraction = 0.2;
  std::size_t max_targets = 50;
  std::size_t min_per_target = 1;
  std::size_t max_per_target = 4;
  /// Ports are drawn from [port_min, port_max].
  std::uint16_t port_min = 1024;
  std::uint16_t port_max = 65535;
  bool gr_only = false;
  RuleId first_id = 1;
};

struct PolicySet {
  std::vector<DeflectionPolicy> policies;
  /// Members that produced no policy because no target had a usable route.
  std::size_t skipped_members = 0;
};

PolicySet generate_policies(const Topology& topo, const Ribs& ribs, const PolicyParams& params);

// --- Forwarding oracle -----------------------------------------------------

struct Loop {
  /// A packet of the header class.
  BitVector witness;
  /// Ids of the prefix's policies whose rule matches the class, ascending.
  std::vector<RuleId> class_rules;
  /// Cycle rotated to start at its smallest AS id.
  std::vector<AsId> cycle;
  /// Policies taken along the cycle, in cycle order.
  std::vector<RuleId> deflections;
  std::vector<SdxId> sdxes;
};

struct HeaderClass {
  BitVector witness;
  std::vector<RuleId> rules;
};

/// Non-empty atoms of the rule lattice: every class is a maximal header set
/// on which each rule either matches all packets or none. With `within`, only
/// the classes inside that cube are produced.
std::vector<HeaderClass> header_classes(const std::vector<const DeflectionPolicy*>& policies,
                                        const std::optional<TernaryRule>& within = std::nullopt);

/// True iff some packet in `cube` matches none of `minus`. Returns a witness.
std::optional<BitVector> cube_minus_union(const TernaryRule& cube, const std::vector<const TernaryRule*>& minus);

/// Every AS uses the first of its own active policies for the prefix (list
/// order is installation order) whose rule matches, else BGP. Reports each
/// distinct cycle once per header class.
std::vector<Loop> forwarding_oracle(const AsGraph& graph, const RibState& rib,
                                    const std::vector<DeflectionPolicy>& active, PrefixId prefix,
                                    const std::optional<TernaryRule>& within = std::nullopt);

/// Loops that adding `candidate` (last in priority) to `active` would create.
std::vector<Loop> loops_with(const AsGraph& graph, const RibState& rib, const std::vector<DeflectionPolicy>& active,
                             const DeflectionPolicy& candidate);

// --- Fixture ---------------------------------------------------------------

/// The two-SDX example: Z is a customer of B and N, N a customer of A, B a
/// customer of M; A-B peer at SDX 1 and N-M peer at SDX 2. Both deflections
/// match HTTP.
struct TwoSdxFixture {
  static constexpr AsId kA = 1, kB = 2, kN = 3, kM = 4, kZ = 5;
  static constexpr SdxId kSdx1 = 1, kSdx2 = 2;
  static constexpr PrefixId kPrefix = 1;

  Topology topo;
  RibState rib;
  DeflectionPolicy r_b;  // B deflects to A at SDX 1
  DeflectionPolicy r_n;  // N deflects to M at SDX 2
};

TwoSdxFixture two_sdx_fixture();

}  // namespace prelude
