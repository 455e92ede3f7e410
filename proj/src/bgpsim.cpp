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

#include "prelude/bgpsim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>
#include <tuple>

#include "prelude/errors.hpp"
#include "prelude/prg.hpp"

namespace prelude {

// --- AsGraph ---------------------------------------------------------------

void AsGraph::add_as(AsId as) { as_ids_.insert(as); }

void AsGraph::check_new_edge(AsId a, AsId b) const {
  if (a == b) throw InvalidInput("self-loop on AS " + std::to_string(a));
  const auto it = adj_.find(a);
  if (it != adj_.end() && it->second.count(b)) {
    throw InvalidInput("duplicate edge " + std::to_string(a) + "-" + std::to_string(b));
  }
}

void AsGraph::add_relation(AsId u, AsId v, Rel rel) {
  as_ids_.insert(u);
  adj_[u][v] = rel;
}

void AsGraph::add_customer_provider(AsId customer, AsId provider) {
  check_new_edge(customer, provider);
  add_relation(customer, provider, Rel::kProvider);
  add_relation(provider, customer, Rel::kCustomer);
}

void AsGraph::add_peer(AsId a, AsId b) {
  check_new_edge(a, b);
  add_relation(a, b, Rel::kPeer);
  add_relation(b, a, Rel::kPeer);
}

void AsGraph::add_edge(const Edge& edge) {
  if (edge.kind == EdgeKind::kPeer) {
    add_peer(edge.a, edge.b);
  } else {
    add_customer_provider(edge.a, edge.b);
  }
}

std::optional<Edge> AsGraph::remove_edge(AsId a, AsId b) {
  const auto rel = relation(a, b);
  if (!rel) return std::nullopt;
  adj_[a].erase(b);
  adj_[b].erase(a);
  switch (*rel) {
    case Rel::kPeer: return Edge{std::min(a, b), std::max(a, b), EdgeKind::kPeer};
    case Rel::kProvider: return Edge{a, b, EdgeKind::kCustomerProvider};
    case Rel::kCustomer: return Edge{b, a, EdgeKind::kCustomerProvider};
  }
  return std::nullopt;
}

std::optional<Rel> AsGraph::relation(AsId u, AsId v) const {
  const auto it = adj_.find(u);
  if (it == adj_.end()) return std::nullopt;
  const auto jt = it->second.find(v);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

std::vector<AsId> AsGraph::neighbors(AsId u) const {
  std::vector<AsId> out;
  const auto it = adj_.find(u);
  if (it == adj_.end()) return out;
  for (const auto& [v, rel] : it->second) out.push_back(v);
  return out;
}

std::vector<AsId> AsGraph::neighbors(AsId u, Rel rel) const {
  std::vector<AsId> out;
  const auto it = adj_.find(u);
  if (it == adj_.end()) return out;
  for (const auto& [v, r] : it->second) {
    if (r == rel) out.push_back(v);
  }
  return out;
}

std::vector<Edge> AsGraph::edges() const {
  std::vector<Edge> out;
  for (const auto& [u, nbrs] : adj_) {
    for (const auto& [v, rel] : nbrs) {
      if (rel == Rel::kProvider) out.push_back({u, v, EdgeKind::kCustomerProvider});
      if (rel == Rel::kPeer && u < v) out.push_back({u, v, EdgeKind::kPeer});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void AsGraph::validate() const {
  // Kahn's algorithm over customer -> provider edges.
  std::map<AsId, std::size_t> pending;
  for (AsId u : as_ids_) pending[u] = neighbors(u, Rel::kCustomer).size();
  std::vector<AsId> ready;
  for (const auto& [u, n] : pending) {
    if (n == 0) ready.push_back(u);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    const AsId u = ready.back();
    ready.pop_back();
    ++seen;
    for (AsId p : neighbors(u, Rel::kProvider)) {
      if (--pending[p] == 0) ready.push_back(p);
    }
  }
  if (seen != as_ids_.size()) throw InvalidInput("customer-provider hierarchy has a cycle");
}

// --- Topology --------------------------------------------------------------

const SdxSite& Topology::site(SdxId id) const {
  for (const auto& s : sites) {
    if (s.id == id) return s;
  }
  throw InvalidInput("unknown SDX " + std::to_string(id));
}

bool Topology::is_member(SdxId sdx, AsId as) const {
  for (const auto& s : sites) {
    if (s.id == sdx) return s.members.count(as) != 0;
  }
  return false;
}

std::vector<SdxId> Topology::sites_of(AsId as) const {
  std::vector<SdxId> out;
  for (const auto& s : sites) {
    if (s.members.count(as)) out.push_back(s.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Topology::validate() const {
  graph.validate();
  std::set<SdxId> ids;
  for (const auto& s : sites) {
    if (!ids.insert(s.id).second) throw InvalidInput("duplicate SDX id " + std::to_string(s.id));
    if (s.members.size() < 2) throw InvalidInput("SDX " + std::to_string(s.id) + " has fewer than two members");
    for (AsId m : s.members) {
      if (!graph.has_as(m)) throw InvalidInput("SDX member AS" + std::to_string(m) + " not in graph");
    }
  }
}

Topology generate_topology(const TopologyParams& p) {
  if (p.n_as < 3) throw GenerationError("n_as must be at least 3");
  if (p.n_tier1 == 0 || p.n_tier1 > p.n_as) throw GenerationError("n_tier1 must be in [1, n_as]");
  if (p.min_providers == 0 || p.min_providers > p.max_providers) {
    throw GenerationError("provider count range is empty");
  }
  if (p.n_sdx > 0 && (p.sdx_min_members < 2 || p.sdx_min_members > p.sdx_max_members || p.sdx_min_members > p.n_as)) {
    throw GenerationError("SDX member range is unsatisfiable");
  }
  if (p.n_sdx > 0xFFFE) throw GenerationError("too many SDXes");
  if (p.peer_ratio < 0) throw GenerationError("peer_ratio must be non-negative");

  Prg rng(Prg::derive({p.seed, 0x70b0}));
  Topology topo;
  AsGraph& g = topo.graph;
  const auto n = static_cast<AsId>(p.n_as);
  const auto t = static_cast<AsId>(p.n_tier1);
  for (AsId a = 1; a <= n; ++a) g.add_as(a);
  for (AsId a = 1; a <= t; ++a) {
    for (AsId b = a + 1; b <= t; ++b) g.add_peer(a, b);
  }
  for (AsId a = t + 1; a <= n; ++a) {
    const std::size_t want = p.min_providers + rng.uniform(p.max_providers - p.min_providers + 1);
    const std::size_t count = std::min<std::size_t>(want, a - 1);
    std::set<AsId> chosen;
    while (chosen.size() < count) chosen.insert(static_cast<AsId>(1 + rng.uniform(a - 1)));
    for (AsId prov : chosen) g.add_customer_provider(a, prov);
  }
  const auto extra = static_cast<std::size_t>(std::llround(p.peer_ratio * static_cast<double>(p.n_as)));
  for (std::size_t i = 0, attempts = 0; i < extra && attempts < 20 * extra + 100; ++attempts) {
    const AsId a = static_cast<AsId>(1 + rng.uniform(n));
    const AsId b = static_cast<AsId>(1 + rng.uniform(n));
    if (a == b || g.relation(a, b)) continue;
    g.add_peer(a, b);
    ++i;
  }
  for (std::size_t s = 0; s < p.n_sdx; ++s) {
    SdxSite site;
    site.id = static_cast<SdxId>(s + 1);
    const std::size_t hi = std::min(p.sdx_max_members, p.n_as);
    const std::size_t size = p.sdx_min_members + rng.uniform(hi - p.sdx_min_members + 1);
    const auto perm = rng.permutation(p.n_as);
    for (std::size_t i = 0; i < size; ++i) site.members.insert(static_cast<AsId>(perm[i] + 1));
    for (AsId a : site.members) {
      for (AsId b : site.members) {
        if (a < b && !g.relation(a, b)) g.add_peer(a, b);
      }
    }
    topo.sites.push_back(std::move(site));
  }
  topo.validate();
  return topo;
}

// --- Import / export -------------------------------------------------------

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_number(const std::string& text, std::uint64_t max, std::size_t line) {
  const std::string t = trim(text);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) || t.size() > 10) {
    throw InvalidInput("line " + std::to_string(line) + ": bad number '" + t + "'");
  }
  const std::uint64_t v = std::stoull(t);
  if (v > max) throw InvalidInput("line " + std::to_string(line) + ": value out of range");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

AsGraph parse_as_relationships(std::istream& in) {
  AsGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split(line, '|');
    if (fields.size() < 3) throw InvalidInput("line " + std::to_string(lineno) + ": expected a|b|rel");
    const auto a = static_cast<AsId>(parse_number(fields[0], 0xFFFFFFFFULL, lineno));
    const auto b = static_cast<AsId>(parse_number(fields[1], 0xFFFFFFFFULL, lineno));
    const std::string rel = trim(fields[2]);
    if (rel == "-1") {
      g.add_customer_provider(b, a);
    } else if (rel == "0") {
      g.add_peer(a, b);
    } else {
      throw InvalidInput("line " + std::to_string(lineno) + ": unknown relationship '" + rel + "'");
    }
  }
  g.validate();
  return g;
}

std::vector<SdxSite> parse_sdx_sites(std::istream& in) {
  std::vector<SdxSite> sites;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw InvalidInput("line " + std::to_string(lineno) + ": expected sdx_id: as,...");
    SdxSite site;
    site.id = static_cast<SdxId>(parse_number(line.substr(0, colon), 0xFFFE, lineno));
    for (const auto& m : split(line.substr(colon + 1), ',')) {
      site.members.insert(static_cast<AsId>(parse_number(m, 0xFFFFFFFFULL, lineno)));
    }
    if (site.members.size() < 2) throw InvalidInput("line " + std::to_string(lineno) + ": fewer than two members");
    sites.push_back(std::move(site));
  }
  return sites;
}

void write_as_relationships(std::ostream& out, const AsGraph& graph) {
  for (const auto& e : graph.edges()) {
    if (e.kind == EdgeKind::kPeer) {
      out << e.a << '|' << e.b << "|0\n";
    } else {
      out << e.b << '|' << e.a << "|-1\n";
    }
  }
}

void write_sdx_sites(std::ostream& out, const std::vector<SdxSite>& sites) {
  for (const auto& s : sites) {
    out << s.id << ':';
    bool first = true;
    for (AsId m : s.members) {
      out << (first ? " " : ",") << m;
      first = false;
    }
    out << '\n';
  }
}

// --- Routes ----------------------------------------------------------------

std::string to_string(RouteClass cls) {
  switch (cls) {
    case RouteClass::kSelf: return "self";
    case RouteClass::kCustomer: return "customer";
    case RouteClass::kPeer: return "peer";
    case RouteClass::kProvider: return "provider";
  }
  return "?";
}

const Route* RibState::route(AsId as) const {
  const auto it = routes.find(as);
  return it == routes.end() ? nullptr : &it->second;
}

bool exports(RouteClass cls, Rel to) {
  return cls == RouteClass::kSelf || cls == RouteClass::kCustomer || to == Rel::kCustomer;
}

RibState compute_routes(const AsGraph& graph, PrefixId prefix, AsId origin) {
  if (!graph.has_as(origin)) throw InvalidInput("origin AS" + std::to_string(origin) + " not in graph");
  RibState rib;
  rib.prefix = prefix;
  rib.origin = origin;
  auto adopt = [&](AsId u, AsId via, RouteClass cls) {
    Route r;
    r.path.reserve(rib.routes.at(via).path.size() + 1);
    r.path.push_back(u);
    const auto& tail = rib.routes.at(via).path;
    r.path.insert(r.path.end(), tail.begin(), tail.end());
    r.next_hop = via;
    r.cls = cls;
    rib.routes.emplace(u, std::move(r));
  };
  rib.routes.emplace(origin, Route{{origin}, origin, RouteClass::kSelf});

  // Customer routes climb provider edges breadth-first.
  std::vector<AsId> frontier{origin};
  while (!frontier.empty()) {
    std::map<AsId, AsId> offers;  // provider -> lowest offering customer
    for (AsId x : frontier) {
      for (AsId p : graph.neighbors(x, Rel::kProvider)) {
        if (rib.routes.count(p)) continue;
        const auto it = offers.find(p);
        if (it == offers.end() || x < it->second) offers[p] = x;
      }
    }
    frontier.clear();
    for (const auto& [p, x] : offers) {
      adopt(p, x, RouteClass::kCustomer);
      frontier.push_back(p);
    }
  }

  // Peer routes: one peer hop onto a customer route.
  std::map<AsId, AsId> peer_choice;
  for (AsId u : graph.as_ids()) {
    if (rib.routes.count(u)) continue;
    std::optional<std::pair<std::size_t, AsId>> best;
    for (AsId v : graph.neighbors(u, Rel::kPeer)) {
      const Route* r = rib.route(v);
      if (!r || !exports(r->cls, Rel::kPeer)) continue;
      const std::pair<std::size_t, AsId> key{r->path.size(), v};
      if (!best || key < *best) best = key;
    }
    if (best) peer_choice[u] = best->second;
  }
  for (const auto& [u, v] : peer_choice) adopt(u, v, RouteClass::kPeer);

  // Provider routes descend customer edges, shortest first.
  using Offer = std::tuple<std::size_t, AsId, AsId>;  // length, via, customer
  std::priority_queue<Offer, std::vector<Offer>, std::greater<>> pq;
  for (const auto& [x, r] : rib.routes) {
    for (AsId c : graph.neighbors(x, Rel::kCustomer)) {
      if (!rib.routes.count(c)) pq.emplace(r.path.size(), x, c);
    }
  }
  while (!pq.empty()) {
    const auto [len, via, c] = pq.top();
    pq.pop();
    if (rib.routes.count(c)) continue;
    adopt(c, via, RouteClass::kProvider);
    for (AsId cc : graph.neighbors(c, Rel::kCustomer)) {
      if (!rib.routes.count(cc)) pq.emplace(len + 1, c, cc);
    }
  }
  return rib;
}

Ribs compute_all_routes(const AsGraph& graph, const std::map<PrefixId, AsId>& origins) {
  Ribs ribs;
  for (const auto& [prefix, origin] : origins) ribs.emplace(prefix, compute_routes(graph, prefix, origin));
  return ribs;
}

std::map<PrefixId, AsId> choose_prefixes(const AsGraph& graph, std::size_t n, std::uint64_t seed) {
  if (n > graph.size()) throw GenerationError("more prefixes than ASes");
  std::vector<AsId> ids(graph.as_ids().begin(), graph.as_ids().end());
  Prg rng(Prg::derive({seed, 0x9f1c}));
  const auto perm = rng.permutation(ids.size());
  std::map<PrefixId, AsId> out;
  for (std::size_t i = 0; i < n; ++i) out[static_cast<PrefixId>(i + 1)] = ids[perm[i]];
  return out;
}

bool is_valley_free(const AsGraph& graph, const std::vector<AsId>& path) {
  // 0 = climbing, 1 = after the peer hop or descending.
  int stage = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto rel = graph.relation(path[i], path[i + 1]);
    if (!rel) return false;
    switch (*rel) {
      case Rel::kProvider:
        if (stage != 0) return false;
        break;
      case Rel::kPeer:
        if (stage != 0) return false;
        stage = 1;
        break;
      case Rel::kCustomer:
        stage = 1;
        break;
    }
  }
  return true;
}

std::vector<SdxId> traversed_sdxes(const std::vector<AsId>& path, const std::vector<SdxSite>& sites) {
  std::vector<const SdxSite*> sorted;
  for (const auto& s : sites) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const SdxSite* a, const SdxSite* b) { return a->id < b->id; });
  std::vector<SdxId> out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    for (const SdxSite* s : sorted) {
      if (s->members.count(path[i]) && s->members.count(path[i + 1])) out.push_back(s->id);
    }
  }
  return out;
}

// --- Deflections -----------------------------------------------------------

std::string to_string(const DeflectionPolicy& p) {
  std::ostringstream os;
  os << "policy " << p.id << ": AS" << p.owner << " -> AS" << p.deflect_to << " at sdx" << p.sdx << " prefix "
     << p.prefix;
  return os.str();
}

bool deflection_available(const AsGraph& graph, const RibState& rib, AsId u, AsId y) {
  const Route* ru = rib.route(u);
  const Route* ry = rib.route(y);
  if (!ru || !ry || u == rib.origin || u == y) return false;
  const auto rel_u = graph.relation(y, u);  // what u is to y
  if (!rel_u || !exports(ry->cls, *rel_u)) return false;
  if (std::find(ry->path.begin(), ry->path.end(), u) != ry->path.end()) return false;
  return ru->next_hop != y;
}

void validate_policy(const Topology& topo, const RibState& rib, const DeflectionPolicy& p) {
  if (p.prefix != rib.prefix) throw InvalidInput(to_string(p) + ": routes are for another prefix");
  if (!topo.is_member(p.sdx, p.owner)) throw InvalidInput(to_string(p) + ": owner is not a member of the SDX");
  if (!topo.is_member(p.sdx, p.deflect_to)) throw InvalidInput(to_string(p) + ": target is not a member of the SDX");
  if (!rib.route(p.deflect_to)) throw InvalidInput(to_string(p) + ": target has no route");
  if (!deflection_available(topo.graph, rib, p.owner, p.deflect_to)) {
    throw InvalidInput(to_string(p) + ": target route is not usable as a deflection");
  }
}

namespace {

RouteClass class_of(Rel rel) {
  switch (rel) {
    case Rel::kCustomer: return RouteClass::kCustomer;
    case Rel::kPeer: return RouteClass::kPeer;
    case Rel::kProvider: return RouteClass::kProvider;
  }
  return RouteClass::kSelf;
}

}  // namespace

std::vector<AsId> deflected_path(const DeflectionPolicy& policy, const RibState& rib) {
  std::vector<AsId> out{policy.owner};
  if (const Route* r = rib.route(policy.deflect_to)) out.insert(out.end(), r->path.begin(), r->path.end());
  return out;
}

bool gr_compliant(const DeflectionPolicy& policy, const RibState& rib, const AsGraph& graph) {
  if (!deflection_available(graph, rib, policy.owner, policy.deflect_to)) return false;
  const auto rel = graph.relation(policy.owner, policy.deflect_to);
  if (class_of(*rel) != rib.route(policy.owner)->cls) return false;
  return is_valley_free(graph, deflected_path(policy, rib));
}

PolicySet generate_policies(const Topology& topo, const Ribs& ribs, const PolicyParams& params) {
  if (params.min_per_target == 0 || params.min_per_target > params.max_per_target) {
    throw GenerationError("policies-per-target range is empty");
  }
  if (params.port_min > params.port_max) throw GenerationError("port range is empty");
  if (params.target_fraction <= 0 || params.target_fraction > 1) {
    throw GenerationError("target_fraction must be in (0, 1]");
  }
  Prg rng(Prg::derive({params.seed, 0x90c1}));
  PolicySet out;
  RuleId next_id = params.first_id;
  std::vector<const SdxSite*> sites;
  for (const auto& s : topo.sites) sites.push_back(&s);
  std::sort(sites.begin(), sites.end(), [](const SdxSite* a, const SdxSite* b) { return a->id < b->id; });

  for (const SdxSite* site : sites) {
    const std::vector<AsId> members(site->members.begin(), site->members.end());
    for (AsId u : members) {
      std::vector<AsId> others;
      for (AsId m : members) {
        if (m != u) others.push_back(m);
      }
      const auto want = static_cast<std::size_t>(std::ceil(params.target_fraction * static_cast<double>(others.size())));
      const std::size_t n_targets = std::min({params.max_targets, want, others.size()});
      const auto perm = rng.permutation(others.size());
      bool produced = false;
      for (std::size_t t = 0; t < n_targets; ++t) {
        const AsId y = others[perm[t]];
        const std::size_t n_rules =
            params.min_per_target + rng.uniform(params.max_per_target - params.min_per_target + 1);
        for (std::size_t k = 0; k < n_rules; ++k) {
          FlowSpec spec;
          spec.ip_proto = rng.bit() ? kProtoTcp : kProtoUdp;
          const auto port = static_cast<std::uint16_t>(
              params.port_min + rng.uniform(std::uint64_t{params.port_max} - params.port_min + 1));
          if (rng.bit()) {
            spec.src_port = port;
          } else {
            spec.dst_port = port;
          }
          const TernaryRule rule = encode(spec);
          for (const auto& [prefix, rib] : ribs) {
            if (!deflection_available(topo.graph, rib, u, y)) continue;
            DeflectionPolicy p{next_id, u, site->id, rule, y, prefix};
            if (params.gr_only && !gr_compliant(p, rib, topo.graph)) continue;
            ++next_id;
            out.policies.push_back(std::move(p));
            produced = true;
          }
        }
      }
      if (!produced) ++out.skipped_members;
    }
  }
  return out;
}

// --- Header classes --------------------------------------------------------

namespace {

std::optional<BitVector> minus_rec(const TernaryRule& cube, std::vector<const TernaryRule*> minus) {
  std::erase_if(minus, [&](const TernaryRule* r) { return !overlaps(cube, *r); });
  for (const TernaryRule* r : minus) {
    if (contains(*r, cube)) return std::nullopt;
  }
  if (minus.empty()) return cube.pattern();
  // Split on a bit the first subtracted cube cares about and this one does not;
  // such a bit exists because it overlaps without containing the cube.
  const TernaryRule& first = *minus.front();
  std::size_t bit = 0;
  for (; bit < cube.width(); ++bit) {
    if (first.mask()[bit] && !cube.mask()[bit]) break;
  }
  for (const bool value : {!first.pattern()[bit], first.pattern()[bit]}) {
    BitVector pattern = cube.pattern();
    BitVector mask = cube.mask();
    pattern.set(bit, value);
    mask.set(bit, true);
    if (auto w = minus_rec(TernaryRule(pattern, mask), minus)) return w;
  }
  return std::nullopt;
}

}  // namespace

std::optional<BitVector> cube_minus_union(const TernaryRule& cube, const std::vector<const TernaryRule*>& minus) {
  for (const TernaryRule* r : minus) {
    if (r->width() != cube.width()) throw InvalidInput("rule width mismatch");
  }
  return minus_rec(cube, minus);
}

std::vector<HeaderClass> header_classes(const std::vector<const DeflectionPolicy*>& policies,
                                        const std::optional<TernaryRule>& within) {
  std::vector<HeaderClass> out;
  if (policies.empty() && !within) return out;
  const std::size_t width = within ? within->width() : policies.front()->rule.width();
  for (const auto* p : policies) {
    if (p->rule.width() != width) throw InvalidInput("rule width mismatch in header classes");
  }
  std::vector<RuleId> included;
  std::vector<const TernaryRule*> excluded;
  std::function<void(std::size_t, const TernaryRule&)> dfs = [&](std::size_t i, const TernaryRule& cube) {
    while (i < policies.size()) {
      const TernaryRule& r = policies[i]->rule;
      if (!overlaps(cube, r)) {
        ++i;
      } else if (contains(r, cube)) {
        included.push_back(policies[i]->id);
        ++i;
      } else {
        break;
      }
    }
    if (i == policies.size()) {
      if (auto w = cube_minus_union(cube, excluded)) {
        HeaderClass hc{std::move(*w), included};
        std::sort(hc.rules.begin(), hc.rules.end());
        out.push_back(std::move(hc));
      }
      return;
    }
    const std::size_t mark = included.size();
    // Branch: inside rule i.
    const TernaryRule inner = *intersect(cube, policies[i]->rule);
    if (cube_minus_union(inner, excluded)) {
      included.push_back(policies[i]->id);
      dfs(i + 1, inner);
    }
    included.resize(mark);
    // Branch: outside rule i.
    excluded.push_back(&policies[i]->rule);
    if (cube_minus_union(cube, excluded)) dfs(i + 1, cube);
    excluded.pop_back();
    included.resize(mark);
  };
  dfs(0, within ? *within : TernaryRule::wildcard(width));
  return out;
}

// --- Forwarding oracle -----------------------------------------------------

std::vector<Loop> forwarding_oracle(const AsGraph& graph, const RibState& rib,
                                    const std::vector<DeflectionPolicy>& active, PrefixId prefix,
                                    const std::optional<TernaryRule>& within) {
  (void)graph;
  std::vector<const DeflectionPolicy*> mine;
  std::map<AsId, std::vector<const DeflectionPolicy*>> by_owner;
  for (const auto& p : active) {
    if (p.prefix != prefix) continue;
    mine.push_back(&p);
    by_owner[p.owner].push_back(&p);
  }
  std::vector<Loop> loops;
  if (mine.empty()) return loops;

  for (const HeaderClass& hc : header_classes(mine, within)) {
    const std::set<RuleId> in_class(hc.rules.begin(), hc.rules.end());
    std::map<AsId, const DeflectionPolicy*> decision;
    for (const auto& [owner, list] : by_owner) {
      if (owner == rib.origin) continue;
      for (const auto* p : list) {
        if (in_class.count(p->id)) {
          decision[owner] = p;
          break;
        }
      }
    }
    auto step = [&](AsId x) -> std::optional<AsId> {
      if (x == rib.origin) return std::nullopt;
      if (const auto it = decision.find(x); it != decision.end()) {
        if (!rib.route(it->second->deflect_to)) return std::nullopt;  // dropped
        return it->second->deflect_to;
      }
      const Route* r = rib.route(x);
      if (!r) return std::nullopt;
      return r->next_hop;
    };
    // Cycles of the successor function; every cycle holds a deflecting AS.
    std::map<AsId, int> color;  // 1 = on the current walk, 2 = finished
    for (const auto& [start, unused] : decision) {
      if (color[start] != 0) continue;
      std::vector<AsId> walk;
      std::optional<AsId> x = start;
      while (x && color[*x] == 0) {
        color[*x] = 1;
        walk.push_back(*x);
        x = step(*x);
      }
      if (x && color[*x] == 1) {
        const auto begin = std::find(walk.begin(), walk.end(), *x);
        std::vector<AsId> cycle(begin, walk.end());
        std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
        Loop loop;
        loop.witness = hc.witness;
        loop.class_rules = hc.rules;
        for (AsId a : cycle) {
          if (const auto it = decision.find(a); it != decision.end()) {
            loop.deflections.push_back(it->second->id);
            loop.sdxes.push_back(it->second->sdx);
          }
        }
        loop.cycle = std::move(cycle);
        loops.push_back(std::move(loop));
      }
      for (AsId a : walk) color[a] = 2;
    }
  }
  return loops;
}

std::vector<Loop> loops_with(const AsGraph& graph, const RibState& rib, const std::vector<DeflectionPolicy>& active,
                             const DeflectionPolicy& candidate) {
  std::vector<DeflectionPolicy> all;
  all.reserve(active.size() + 1);
  for (const auto& p : active) {
    if (p.prefix == candidate.prefix) all.push_back(p);
  }
  all.push_back(candidate);
  auto loops = forwarding_oracle(graph, rib, all, candidate.prefix, candidate.rule);
  std::erase_if(loops, [&](const Loop& l) {
    return std::find(l.deflections.begin(), l.deflections.end(), candidate.id) == l.deflections.end();
  });
  return loops;
}

// --- Fixture ---------------------------------------------------------------

TwoSdxFixture two_sdx_fixture() {
  using F = TwoSdxFixture;
  TwoSdxFixture f;
  AsGraph& g = f.topo.graph;
  for (AsId a : {F::kA, F::kB, F::kN, F::kM, F::kZ}) g.add_as(a);
  g.add_customer_provider(F::kZ, F::kB);
  g.add_customer_provider(F::kZ, F::kN);
  g.add_customer_provider(F::kN, F::kA);
  g.add_customer_provider(F::kB, F::kM);
  g.add_peer(F::kA, F::kB);
  g.add_peer(F::kN, F::kM);
  f.topo.sites = {{F::kSdx1, {F::kA, F::kB}}, {F::kSdx2, {F::kN, F::kM}}};
  f.topo.validate();
  f.rib = compute_routes(g, F::kPrefix, F::kZ);
  FlowSpec http;
  http.ip_proto = kProtoTcp;
  http.dst_port = 80;
  f.r_b = {1, F::kB, F::kSdx1, encode(http), F::kA, F::kPrefix};
  f.r_n = {2, F::kN, F::kSdx2, encode(http), F::kM, F::kPrefix};
  return f;
}

}  // namespace prelude
