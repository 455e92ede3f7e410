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

#include "prelude/ctl.hpp"

#include <algorithm>
#include <deque>
#include <exception>
#include <future>
#include <sstream>

#include "prelude/errors.hpp"
#include "prelude/prg.hpp"

namespace prelude {

std::string to_string(Decision d) { return d == Decision::kAccept ? "accept" : "reject"; }

std::string to_string(Reason r) {
  switch (r) {
    case Reason::kSafe: return "safe";
    case Reason::kLoopDetected: return "loop_detected";
    case Reason::kBudgetExhausted: return "budget_exhausted";
    case Reason::kQueryFailed: return "query_failed";
    case Reason::kRouteUnavailable: return "route_unavailable";
  }
  return "?";
}

std::string to_string(const Verdict& v) {
  if (v.accepted()) return "accept";
  std::string out = "reject:" + to_string(v.reason);
  if (v.closing_sdx) out += "@sdx" + std::to_string(*v.closing_sdx);
  return out;
}

std::string to_string(QueryEngine e) { return e == QueryEngine::kSmpc ? "smpc" : "plaintext"; }

QueryEngine parse_query_engine(std::string_view text) {
  if (text == "smpc") return QueryEngine::kSmpc;
  if (text == "plaintext") return QueryEngine::kPlaintext;
  throw InvalidInput("unknown query engine '" + std::string(text) + "'");
}

VerifyRequest VerifyRequest::for_policy(const DeflectionPolicy& p, std::size_t threshold) {
  VerifyRequest r;
  r.requester = p.owner;
  r.origin_sdx = p.sdx;
  r.policy = p;
  r.prefix = p.prefix;
  r.visited = {{p.sdx, p.owner}};
  r.budget = threshold;
  return r;
}

// --- Exploration -----------------------------------------------------------

Exploration explore(const Topology& topo, const RibState& rib, const VerifyRequest& req, const HopSource& hops,
                    const std::function<void(const std::vector<std::pair<SdxId, AsId>>&)>& prefetch) {
  if (req.budget == 0) throw InvalidInput("path threshold must be at least 1");
  Exploration out;
  const DeflectionPolicy& p = req.policy;
  const Route* first = rib.route(p.deflect_to);
  if (!first) {
    out.verdict = Verdict::reject(Reason::kRouteUnavailable);
    return out;
  }
  std::map<AsId, std::vector<SdxId>> member_of;
  for (const auto& s : topo.sites) {
    for (AsId m : s.members) member_of[m].push_back(s.id);
  }
  for (auto& [as, list] : member_of) std::sort(list.begin(), list.end());

  std::size_t max_chain = 1;
  bool exhausted = false;
  std::optional<SdxId> loop_at;

  // Returns true once a loop is found; exploration stops there.
  std::function<bool(const std::vector<AsId>&, std::size_t, std::size_t, SdxId)> rec =
      [&](const std::vector<AsId>& walk, std::size_t from, std::size_t chain, SdxId via) {
        max_chain = std::max(max_chain, chain);
        std::set<AsId> seen;
        for (AsId a : walk) {
          if (!seen.insert(a).second) {
            loop_at = via;
            return true;
          }
        }
        std::vector<std::pair<SdxId, AsId>> level;
        for (std::size_t i = from; i < walk.size(); ++i) {
          if (walk[i] == rib.origin) continue;
          const auto it = member_of.find(walk[i]);
          if (it == member_of.end()) continue;
          for (SdxId t : it->second) level.emplace_back(t, walk[i]);
        }
        if (prefetch && !level.empty()) prefetch(level);
        for (const auto& [t, a] : level) {
          out.queried.emplace(t, a);
          const std::size_t i =
              static_cast<std::size_t>(std::find(walk.begin() + from, walk.end(), a) - walk.begin());
          for (const NextHopId& hop : hops(t, a)) {
            if (std::find(walk.begin(), walk.begin() + i + 1, hop.as) != walk.begin() + i + 1) {
              loop_at = hop.sdx;
              return true;
            }
            if (chain >= req.budget) {
              exhausted = true;
              continue;
            }
            const Route* rz = rib.route(hop.as);
            if (!rz) continue;  // dropped, cannot loop
            std::vector<AsId> next(walk.begin(), walk.begin() + i + 1);
            next.insert(next.end(), rz->path.begin(), rz->path.end());
            if (rec(next, i + 1, chain + 1, hop.sdx)) return true;
          }
        }
        return false;
      };

  std::vector<AsId> walk{p.owner};
  walk.insert(walk.end(), first->path.begin(), first->path.end());
  try {
    if (rec(walk, 1, 1, p.sdx)) {
      out.verdict = Verdict::reject(Reason::kLoopDetected, loop_at);
    } else if (exhausted) {
      out.verdict = Verdict::reject(Reason::kBudgetExhausted);
    } else {
      out.verdict = Verdict::accept();
    }
  } catch (const QueryAborted&) {
    out.verdict = Verdict::reject(Reason::kQueryFailed);
  }
  out.verdict.max_chain = max_chain;
  out.verdict.queries = out.queried.size();
  return out;
}

Verdict perfect_knowledge_check(const RibState& rib, const std::vector<DeflectionPolicy>& active,
                                const DeflectionPolicy& candidate, std::size_t threshold) {
  if (threshold == 0) throw InvalidInput("path threshold must be at least 1");
  std::vector<const DeflectionPolicy*> mine;
  for (const auto& p : active) {
    if (p.prefix == candidate.prefix) mine.push_back(&p);
  }
  mine.push_back(&candidate);
  std::size_t max_chain = 1;
  bool exhausted = false;
  for (const HeaderClass& hc : header_classes(mine, candidate.rule)) {
    const std::set<RuleId> in_class(hc.rules.begin(), hc.rules.end());
    std::map<AsId, const DeflectionPolicy*> decision;
    for (const auto* p : mine) {
      if (p->owner != rib.origin && in_class.count(p->id) && !decision.count(p->owner)) decision[p->owner] = p;
    }
    if (decision.at(candidate.owner)->id != candidate.id) continue;  // shadowed in this class
    std::set<AsId> visited{candidate.owner};
    AsId x = candidate.deflect_to;
    SdxId via = candidate.sdx;
    std::size_t chain = 1;
    while (true) {
      if (!visited.insert(x).second) return Verdict::reject(Reason::kLoopDetected, via);
      if (x == rib.origin) break;
      if (const auto it = decision.find(x); it != decision.end()) {
        if (chain >= threshold) {
          exhausted = true;
          break;
        }
        ++chain;
        max_chain = std::max(max_chain, chain);
        via = it->second->sdx;
        x = it->second->deflect_to;
        if (!rib.route(x)) break;
        continue;
      }
      const Route* r = rib.route(x);
      if (!r) break;
      x = r->next_hop;
    }
  }
  Verdict v = exhausted ? Verdict::reject(Reason::kBudgetExhausted) : Verdict::accept();
  v.max_chain = max_chain;
  return v;
}

// --- Network ---------------------------------------------------------------

struct Network::Node {
  SdxId id = 0;
  RuleTable table;
  std::map<std::pair<PrefixId, AsId>, std::set<std::pair<SdxId, RuleId>>> subscribers;
};

std::string Event::to_line() const {
  std::ostringstream os;
  os << "t=" << time << " sdx=" << sdx << " kind=" << kind << " prefix=" << prefix;
  if (rule) os << " rule=" << *rule;
  if (k) os << " k=" << *k;
  if (!verdict.empty()) os << " verdict=" << verdict;
  if (!detail.empty()) os << " detail=" << detail;
  return os.str();
}

Network::Network(Topology topo, std::map<PrefixId, AsId> origins, NetworkOptions options)
    : topo_(std::move(topo)),
      origins_(std::move(origins)),
      options_(options),
      dealer_(Prg::derive({options.seed, 0xdea1}).lo) {
  topo_.validate();
  ribs_ = compute_all_routes(topo_.graph, origins_);
  for (const auto& s : topo_.sites) {
    auto n = std::make_unique<Node>();
    n->id = s.id;
    nodes_.emplace(s.id, std::move(n));
  }
  if (options_.parallelism == 0) options_.parallelism = 1;
}

Network::~Network() = default;

const RibState& Network::rib(PrefixId prefix) const {
  const auto it = ribs_.find(prefix);
  if (it == ribs_.end()) throw InvalidInput("unknown prefix " + std::to_string(prefix));
  return it->second;
}

Network::Node& Network::node(SdxId sdx) {
  const auto it = nodes_.find(sdx);
  if (it == nodes_.end()) throw InvalidInput("unknown SDX " + std::to_string(sdx));
  return *it->second;
}

const Network::Node& Network::node(SdxId sdx) const {
  const auto it = nodes_.find(sdx);
  if (it == nodes_.end()) throw InvalidInput("unknown SDX " + std::to_string(sdx));
  return *it->second;
}

const RuleTable& Network::table(SdxId sdx) const { return node(sdx).table; }

void Network::log_event(Event e) {
  e.time = ++clock_;
  log_.push_back(std::move(e));
}

std::set<NextHopId> Network::remote_query(SdxId holder, const DeflectionPolicy& policy, AsId owner,
                                          std::uint64_t nonce) {
  const QueryOptions q{options_.backend, nonce, Prg::derive({options_.seed, policy.sdx, 0x51}).lo};
  const std::uint64_t holder_seed = Prg::derive({options_.seed, holder, 0x4f}).lo;
  if (unreachable_.count(holder)) {
    auto [mine, theirs] = make_loopback_pair();
    theirs->close();
    return query(*mine, policy.rule, policy.prefix, owner, dealer_, q).hops;
  }
  return query_in_process(node(holder).table, policy.rule, policy.prefix, owner, dealer_, q, holder_seed,
                          options_.one_way_delay)
      .result.hops;
}

void Network::fill_cache(SdxId local, const DeflectionPolicy& policy,
                         const std::vector<std::pair<SdxId, AsId>>& pairs, QueryCache& cache) {
  std::vector<std::pair<SdxId, AsId>> todo;
  for (const auto& key : pairs) {
    if (!cache.count(key) && std::find(todo.begin(), todo.end(), key) == todo.end()) todo.push_back(key);
  }
  std::vector<std::pair<SdxId, AsId>> remote;
  for (const auto& key : todo) {
    const auto& [t, a] = key;
    if (t == local) {
      // The verifier's own table is consulted directly.
      cache[key] = oracle_query(node(t).table, policy.rule, policy.prefix, a).hops;
      log_event({0, t, "local_query", policy.prefix, policy.id,
                 static_cast<std::uint32_t>(node(t).table.count(policy.prefix, a)), "", ""});
    } else {
      remote.push_back(key);
    }
  }
  std::vector<std::uint64_t> nonces;
  for (std::size_t i = 0; i < remote.size(); ++i) nonces.push_back(Prg::derive({options_.seed, ++nonce_counter_}).lo);

  std::vector<std::set<NextHopId>> results(remote.size());
  std::exception_ptr failure;
  for (std::size_t begin = 0; begin < remote.size(); begin += options_.parallelism) {
    const std::size_t end = std::min(remote.size(), begin + options_.parallelism);
    std::vector<std::future<std::set<NextHopId>>> running;
    for (std::size_t i = begin; i < end; ++i) {
      const auto [t, a] = remote[i];
      if (options_.engine == QueryEngine::kPlaintext && !unreachable_.count(t)) {
        std::promise<std::set<NextHopId>> ready;
        ready.set_value(oracle_query(node(t).table, policy.rule, policy.prefix, a).hops);
        running.push_back(ready.get_future());
      } else {
        running.push_back(std::async(std::launch::async, [this, t = t, a = a, &policy, nonce = nonces[i]] {
          return remote_query(t, policy, a, nonce);
        }));
      }
    }
    for (std::size_t i = begin; i < end; ++i) {
      try {
        results[i] = running[i - begin].get();
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
  }
  for (std::size_t i = 0; i < remote.size(); ++i) {
    const auto [t, a] = remote[i];
    log_event({0, local, "query_sent", policy.prefix, policy.id, std::nullopt, "", "to=sdx" + std::to_string(t)});
    log_event({0, t, "serve_query", policy.prefix, std::nullopt,
               static_cast<std::uint32_t>(node(t).table.count(policy.prefix, a)), "", ""});
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < remote.size(); ++i) cache[remote[i]] = std::move(results[i]);
}

Exploration Network::run_prelude(const VerifyRequest& req, QueryCache& cache) {
  const RibState& r = rib(req.prefix);
  auto hops = [&](SdxId t, AsId a) { return cache.at({t, a}); };
  auto prefetch = [&](const std::vector<std::pair<SdxId, AsId>>& pairs) {
    fill_cache(req.origin_sdx, req.policy, pairs, cache);
  };
  return explore(topo_, r, req, hops, prefetch);
}

Exploration Network::run_sidr(const VerifyRequest& req) {
  const RibState& r = rib(req.prefix);
  auto hops = [&](SdxId t, AsId a) {
    std::set<NextHopId> out;
    for (const auto& e : node(t).table.entries(req.prefix, a)) out.insert(e.next_hop);
    return out;
  };
  return explore(topo_, r, req, hops);
}

Verdict Network::check(const DeflectionPolicy& policy, std::size_t threshold) {
  return check_thresholds(policy, {threshold}).front();
}

Verdict Network::sidr_check(const DeflectionPolicy& policy, std::size_t threshold) {
  return sidr_check_thresholds(policy, {threshold}).front();
}

std::vector<Verdict> Network::check_thresholds(const DeflectionPolicy& policy,
                                               const std::vector<std::size_t>& thresholds) {
  validate_policy(topo_, rib(policy.prefix), policy);
  QueryCache cache;
  std::vector<Verdict> out;
  for (std::size_t t : thresholds) out.push_back(run_prelude(VerifyRequest::for_policy(policy, t), cache).verdict);
  return out;
}

std::vector<Verdict> Network::sidr_check_thresholds(const DeflectionPolicy& policy,
                                                    const std::vector<std::size_t>& thresholds) {
  validate_policy(topo_, rib(policy.prefix), policy);
  std::vector<Verdict> out;
  for (std::size_t t : thresholds) out.push_back(run_sidr(VerifyRequest::for_policy(policy, t)).verdict);
  return out;
}

void Network::send_control(SdxId from, SdxId to, MsgKind kind, const std::vector<std::uint8_t>& payload) {
  const Frame frame = decode_frame(encode_frame(Frame{kind, payload}));
  ++control_frames_;
  ByteReader r(frame.payload);
  const PrefixId prefix = r.u32();
  log_event({0, to, kind == MsgKind::kSubscribe ? "subscribe" : "notify", prefix, std::nullopt, std::nullopt, "",
             "from=sdx" + std::to_string(from)});
}

void Network::register_policy(const DeflectionPolicy& policy, std::size_t threshold,
                              const std::set<std::pair<SdxId, AsId>>& queried) {
  if (installed_.count(policy.id)) throw InvalidInput("rule " + std::to_string(policy.id) + " is already active");
  node(policy.sdx).table.register_entry(
      {policy.id, policy.rule, NextHopId{policy.sdx, policy.deflect_to}, policy.owner, policy.prefix});
  installed_[policy.id] = {policy, next_seq_++, threshold};
  for (const auto& [t, a] : queried) {
    auto& subs = node(t).subscribers[{policy.prefix, a}];
    if (!subs.insert({policy.sdx, policy.id}).second) continue;
    ByteWriter w;
    w.u32(policy.prefix);
    w.u32(a);
    w.u64(policy.id);
    send_control(policy.sdx, t, MsgKind::kSubscribe, w.take());
  }
}

void Network::admit(const DeflectionPolicy& policy) {
  validate_policy(topo_, rib(policy.prefix), policy);
  register_policy(policy, kUnbounded, {});
}

Verdict Network::handle_install(const DeflectionPolicy& policy, std::size_t threshold) {
  return handle_install(VerifyRequest::for_policy(policy, threshold));
}

Verdict Network::handle_install(const VerifyRequest& request) {
  const DeflectionPolicy& p = request.policy;
  validate_policy(topo_, rib(p.prefix), p);
  if (installed_.count(p.id)) throw InvalidInput("rule " + std::to_string(p.id) + " is already active");
  log_event({0, p.sdx, "install_request", p.prefix, p.id, std::nullopt, "", ""});
  QueryCache cache;
  const Exploration ex = run_prelude(request, cache);
  log_event({0, p.sdx, "install", p.prefix, p.id, std::nullopt, to_string(ex.verdict), ""});
  if (ex.verdict.accepted()) register_policy(p, request.budget, ex.queried);
  return ex.verdict;
}

std::vector<RuleId> Network::retract(RuleId rule, const std::string& kind, std::size_t* notified) {
  const auto it = installed_.find(rule);
  const DeflectionPolicy p = it->second.policy;
  installed_.erase(it);
  Node& home = node(p.sdx);
  home.table.deregister(rule);
  for (auto& [id, n] : nodes_) {
    for (auto& [key, subs] : n->subscribers) subs.erase({p.sdx, rule});
  }
  log_event({0, p.sdx, kind, p.prefix, rule, std::nullopt, "", ""});
  std::vector<RuleId> dependents;
  const auto subs_it = home.subscribers.find({p.prefix, p.owner});
  if (subs_it == home.subscribers.end()) return dependents;
  for (const auto& [sub_sdx, sub_rule] : subs_it->second) {
    ByteWriter w;
    w.u32(p.prefix);
    w.u32(p.owner);
    send_control(p.sdx, sub_sdx, MsgKind::kNotifyChange, w.take());
    if (notified) ++*notified;
    dependents.push_back(sub_rule);
  }
  return dependents;
}

std::vector<std::pair<RuleId, Verdict>> Network::reverify(std::vector<RuleId> rules) {
  std::vector<std::pair<RuleId, Verdict>> out;
  std::deque<RuleId> work(rules.begin(), rules.end());
  while (!work.empty()) {
    const RuleId id = work.front();
    work.pop_front();
    const auto it = installed_.find(id);
    if (it == installed_.end()) continue;
    const DeflectionPolicy p = it->second.policy;
    const std::size_t threshold = it->second.threshold;
    QueryCache cache;
    const Exploration ex = run_prelude(VerifyRequest::for_policy(p, threshold), cache);
    log_event({0, p.sdx, "reverify", p.prefix, id, std::nullopt, to_string(ex.verdict), ""});
    out.emplace_back(id, ex.verdict);
    if (ex.verdict.accepted()) {
      for (const auto& [t, a] : ex.queried) {
        if (node(t).subscribers[{p.prefix, a}].insert({p.sdx, id}).second) {
          ByteWriter w;
          w.u32(p.prefix);
          w.u32(a);
          w.u64(id);
          send_control(p.sdx, t, MsgKind::kSubscribe, w.take());
        }
      }
    } else {
      for (RuleId dep : retract(id, "deactivate", nullptr)) {
        if (std::find(work.begin(), work.end(), dep) == work.end()) work.push_back(dep);
      }
    }
  }
  return out;
}

RemoveResult Network::handle_remove(SdxId sdx, RuleId rule) {
  RemoveResult res;
  const auto it = installed_.find(rule);
  if (it == installed_.end() || it->second.policy.sdx != sdx) {
    log_event({0, sdx, "remove_unknown", 0, rule, std::nullopt, "", "warning"});
    return res;
  }
  res.found = true;
  const auto dependents = retract(rule, "remove", &res.notified);
  res.reverified = reverify(dependents);
  return res;
}

std::vector<std::pair<RuleId, Verdict>> Network::handle_bgp_update(const BgpChange& change) {
  std::map<RuleId, std::vector<AsId>> before;
  for (const auto& [id, inst] : installed_) before[id] = deflected_path(inst.policy, rib(inst.policy.prefix));

  if (change.kind == BgpChange::Kind::kRemoveEdge) {
    topo_.graph.remove_edge(change.edge.a, change.edge.b);
  } else {
    topo_.graph.add_edge(change.edge);
    try {
      topo_.graph.validate();
    } catch (const InvalidInput&) {
      topo_.graph.remove_edge(change.edge.a, change.edge.b);
      throw;
    }
  }
  ribs_ = compute_all_routes(topo_.graph, origins_);
  log_event({0, 0, "bgp_update", 0, std::nullopt, std::nullopt, "",
             (change.kind == BgpChange::Kind::kAddEdge ? "add=" : "remove=") + std::to_string(change.edge.a) + "-" +
                 std::to_string(change.edge.b)});

  std::vector<std::pair<std::uint64_t, RuleId>> changed;
  for (const auto& [id, inst] : installed_) {
    if (deflected_path(inst.policy, rib(inst.policy.prefix)) != before[id]) changed.emplace_back(inst.seq, id);
  }
  std::sort(changed.begin(), changed.end());
  std::vector<std::pair<RuleId, Verdict>> out;
  std::vector<RuleId> work;
  for (const auto& [seq, id] : changed) {
    const DeflectionPolicy& p = installed_.at(id).policy;
    if (!rib(p.prefix).route(p.deflect_to)) {
      out.emplace_back(id, Verdict::reject(Reason::kRouteUnavailable));
      for (RuleId dep : retract(id, "deactivate", nullptr)) work.push_back(dep);
    } else {
      work.push_back(id);
    }
  }
  for (auto& v : reverify(work)) out.push_back(std::move(v));
  return out;
}

std::vector<DeflectionPolicy> Network::active_policies() const {
  std::vector<std::pair<std::uint64_t, const DeflectionPolicy*>> order;
  for (const auto& [id, inst] : installed_) order.emplace_back(inst.seq, &inst.policy);
  std::sort(order.begin(), order.end());
  std::vector<DeflectionPolicy> out;
  for (const auto& [seq, p] : order) out.push_back(*p);
  return out;
}

std::vector<DeflectionPolicy> Network::active_policies(PrefixId prefix) const {
  auto all = active_policies();
  std::erase_if(all, [&](const DeflectionPolicy& p) { return p.prefix != prefix; });
  return all;
}

bool Network::is_active(RuleId rule) const { return installed_.count(rule) != 0; }

std::size_t Network::subscriber_count(SdxId sdx, PrefixId prefix, AsId owner) const {
  const Node& n = node(sdx);
  const auto it = n.subscribers.find({prefix, owner});
  return it == n.subscribers.end() ? 0 : it->second.size();
}

}  // namespace prelude
