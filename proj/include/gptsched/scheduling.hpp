#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gptsched/core_model.hpp"
#include "gptsched/power.hpp"
#include "gptsched/profiler.hpp"

namespace gptsched {

enum class Algorithm { max_util, load_balance, power };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::max_util: return "max-util";
    case Algorithm::load_balance: return "load-balance";
    case Algorithm::power: return "power";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::max_util, Algorithm::load_balance, Algorithm::power}) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorKind::config, "unknown algorithm '" + std::string(s) + "' (expected max-util|load-balance|power)");
}

enum class TraceDetail {
  decisions,  // one record per request, no per-node scan entries
  full,       // every scanned node, with power estimates for the power scheduler
};

struct SchedulerConfig {
  Threshold threshold{0.8};
  std::optional<NodeTemplate> autoscale_template;
  bool resort_after_each_allocation = false;
  PowerPolicy power_policy;
  ProfilerCoefficients profiler;
  TraceDetail trace_detail = TraceDetail::full;
};

// Hands out "auto-1", "auto-2", ... State survives across scheduler calls so a
// timeline run never reuses an id.
class NodeIdSequence {
 public:
  explicit NodeIdSequence(std::string prefix = "auto-") : prefix_(std::move(prefix)) {}

  std::string next() { return prefix_ + std::to_string(next_++); }

 private:
  std::string prefix_;
  std::uint64_t next_ = 1;
};

inline bool fits(const Node& node, const UtilizationVector& pct, double bound) {
  const double limit = bound + kEpsilon;
  return node.utilization.compute + pct.compute <= limit && node.utilization.memory + pct.memory <= limit &&
         node.utilization.storage + pct.storage <= limit;
}

inline bool fits(const Node& node, const UtilizationVector& pct, Threshold threshold) {
  return fits(node, pct, threshold.value());
}

inline Node create_new_node(const NodeTemplate& spec, NodeIdSequence& ids) { return make_node(ids.next(), spec); }

namespace detail {

struct ResolvedRequest {
  const GptRequest* request;
  ResourceVector demand;
};

// Demands resolved up front, then descending compute demand with ascending
// id as the tie-break.
inline std::vector<ResolvedRequest> resolve_and_sort(std::span<const GptRequest> queue,
                                                     const ProfilerCoefficients& coeffs) {
  validate_workload(queue);
  std::vector<ResolvedRequest> out;
  out.reserve(queue.size());
  for (const auto& r : queue) out.push_back({&r, estimate_demand(r, coeffs)});
  std::sort(out.begin(), out.end(), [](const ResolvedRequest& a, const ResolvedRequest& b) {
    if (a.demand.compute != b.demand.compute) return a.demand.compute > b.demand.compute;
    return a.request->id < b.request->id;
  });
  return out;
}

class ClusterIds {
 public:
  explicit ClusterIds(const Cluster& nodes) {
    for (const auto& n : nodes) {
      if (!ids_.insert(n.id).second) throw Error(ErrorKind::validation, "duplicate node id '" + n.id + "'");
    }
  }

  std::string fresh(NodeIdSequence& seq) {
    std::string id = seq.next();
    while (ids_.contains(id)) id = seq.next();
    ids_.insert(id);
    return id;
  }

 private:
  std::unordered_set<std::string> ids_;
};

enum class UtilOrder { descending, ascending };

struct UtilComparator {
  const Cluster* nodes;
  UtilOrder order;

  bool operator()(std::size_t a, std::size_t b) const {
    const Node& na = (*nodes)[a];
    const Node& nb = (*nodes)[b];
    if (na.utilization.compute != nb.utilization.compute) {
      return order == UtilOrder::descending ? na.utilization.compute > nb.utilization.compute
                                            : na.utilization.compute < nb.utilization.compute;
    }
    return na.id < nb.id;
  }
};

// Moves order[pos] to its sorted place; everything else is already sorted.
template <typename Compare>
void reposition(std::vector<std::size_t>& order, std::size_t pos, Compare cmp) {
  const std::size_t moved = order[pos];
  order.erase(order.begin() + static_cast<std::ptrdiff_t>(pos));
  order.insert(std::upper_bound(order.begin(), order.end(), moved, cmp), moved);
}

struct Placement {
  std::optional<std::size_t> node_index;
  DecisionReason reason;
};

// Creates a node from the autoscale template if the request fits a fresh one
// under `bound`; never loops on a request that cannot fit anywhere.
inline Placement place_on_new_node(Cluster& nodes, const ResolvedRequest& req, const SchedulerConfig& cfg,
                                   double bound, ClusterIds& ids, NodeIdSequence& seq,
                                   AllocationOutcome& outcome) {
  if (!cfg.autoscale_template) return {std::nullopt, DecisionReason::no_feasible_node};
  const UtilizationVector pct = demand_percentages(req.demand, cfg.autoscale_template->capacity);
  if (pct.max_component() > bound + kEpsilon) return {std::nullopt, DecisionReason::infeasible_on_any_node};
  Node fresh = make_node(ids.fresh(seq), *cfg.autoscale_template);
  fresh.allocate(req.request->id, pct);
  outcome.created_node_ids.push_back(fresh.id);
  nodes.push_back(std::move(fresh));
  return {nodes.size() - 1, DecisionReason::allocated_new_node};
}

inline void record(AllocationOutcome& outcome, DecisionRecord rec, const Placement& placed, const Cluster& nodes) {
  rec.reason = placed.reason;
  if (placed.node_index) {
    rec.node_id = nodes[*placed.node_index].id;
    outcome.allocation.emplace(rec.request_id, *rec.node_id);
  } else {
    outcome.unallocated.push_back(rec.request_id);
  }
  outcome.trace.push_back(std::move(rec));
}

// Shared body of the max-utilization and load-balancing schedulers: first fit
// under the threshold over a node order fixed by compute utilization.
inline AllocationOutcome threshold_first_fit(std::span<const GptRequest> queue, Cluster& nodes,
                                             const SchedulerConfig& cfg, NodeIdSequence& seq, UtilOrder direction) {
  const auto requests = resolve_and_sort(queue, cfg.profiler);
  ClusterIds ids(nodes);
  const double bound = cfg.threshold.value();
  const bool full_trace = cfg.trace_detail == TraceDetail::full;

  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const UtilComparator cmp{&nodes, direction};
  std::sort(order.begin(), order.end(), cmp);

  AllocationOutcome outcome;
  for (const auto& req : requests) {
    DecisionRecord rec{req.request->id, req.demand, std::nullopt, DecisionReason::no_feasible_node, {}};
    Placement placed{std::nullopt, DecisionReason::no_feasible_node};
    std::size_t pos = 0;
    for (; pos < order.size(); ++pos) {
      Node& node = nodes[order[pos]];
      const UtilizationVector pct = demand_percentages(req.demand, node.spec.capacity);
      const bool ok = fits(node, pct, bound);
      if (full_trace) rec.scanned.push_back({node.id, ok, std::nullopt});
      if (ok) {
        node.allocate(req.request->id, pct);
        placed = {order[pos], DecisionReason::allocated};
        break;
      }
    }
    if (placed.node_index) {
      if (cfg.resort_after_each_allocation) reposition(order, pos, cmp);
    } else {
      placed = place_on_new_node(nodes, req, cfg, bound, ids, seq, outcome);
      if (placed.node_index) {
        order.push_back(*placed.node_index);
        if (cfg.resort_after_each_allocation) reposition(order, order.size() - 1, cmp);
      }
    }
    record(outcome, std::move(rec), placed, nodes);
  }
  return outcome;
}

}  // namespace detail

inline AllocationOutcome schedule_max_util(std::span<const GptRequest> queue, Cluster& nodes,
                                           const SchedulerConfig& cfg, NodeIdSequence& ids) {
  return detail::threshold_first_fit(queue, nodes, cfg, ids, detail::UtilOrder::descending);
}

inline AllocationOutcome schedule_max_util(std::span<const GptRequest> queue, Cluster& nodes,
                                           const SchedulerConfig& cfg) {
  NodeIdSequence ids;
  return schedule_max_util(queue, nodes, cfg, ids);
}

inline AllocationOutcome schedule_load_balance(std::span<const GptRequest> queue, Cluster& nodes,
                                               const SchedulerConfig& cfg, NodeIdSequence& ids) {
  return detail::threshold_first_fit(queue, nodes, cfg, ids, detail::UtilOrder::ascending);
}

inline AllocationOutcome schedule_load_balance(std::span<const GptRequest> queue, Cluster& nodes,
                                               const SchedulerConfig& cfg) {
  NodeIdSequence ids;
  return schedule_load_balance(queue, nodes, cfg, ids);
}

// Greedy minimum power placement. Candidates are nodes with room up to full
// capacity (the threshold is not consulted); nodes are scanned in ascending id
// order and a strict `<` keeps the earliest node on ties. Node creation only
// happens when an autoscale template is configured and nothing qualifies.
inline AllocationOutcome schedule_power_efficient(std::span<const GptRequest> queue, Cluster& nodes,
                                                  const SchedulerConfig& cfg, NodeIdSequence& seq) {
  const auto requests = detail::resolve_and_sort(queue, cfg.profiler);
  detail::ClusterIds ids(nodes);
  const bool full_trace = cfg.trace_detail == TraceDetail::full;

  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto by_id = [&nodes](std::size_t a, std::size_t b) { return nodes[a].id < nodes[b].id; };
  std::sort(order.begin(), order.end(), by_id);

  AllocationOutcome outcome;
  for (const auto& req : requests) {
    DecisionRecord rec{req.request->id, req.demand, std::nullopt, DecisionReason::no_feasible_node, {}};
    double min_power = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> chosen;
    std::optional<UtilizationVector> chosen_pct;
    if (full_trace) rec.scanned.reserve(order.size());
    for (std::size_t idx : order) {
      const Node& node = nodes[idx];
      const UtilizationVector pct = demand_percentages(req.demand, node.spec.capacity);
      if (!fits(node, pct, 1.0)) {
        if (full_trace) rec.scanned.push_back({node.id, false, std::nullopt});
        continue;
      }
      const double power = estimate_power_delta(node, pct, cfg.power_policy);
      if (full_trace) rec.scanned.push_back({node.id, true, power});
      if (power < min_power) {
        min_power = power;
        chosen = idx;
        chosen_pct = pct;
      }
    }

    detail::Placement placed{std::nullopt, DecisionReason::no_feasible_node};
    if (chosen) {
      nodes[*chosen].allocate(req.request->id, *chosen_pct);
      placed = {chosen, DecisionReason::allocated};
    } else {
      placed = detail::place_on_new_node(nodes, req, cfg, 1.0, ids, seq, outcome);
      if (placed.node_index) {
        const std::size_t idx = *placed.node_index;
        order.insert(std::upper_bound(order.begin(), order.end(), idx, by_id), idx);
      }
    }
    detail::record(outcome, std::move(rec), placed, nodes);
  }
  return outcome;
}

inline AllocationOutcome schedule_power_efficient(std::span<const GptRequest> queue, Cluster& nodes,
                                                  const SchedulerConfig& cfg) {
  NodeIdSequence ids;
  return schedule_power_efficient(queue, nodes, cfg, ids);
}

inline AllocationOutcome schedule(Algorithm algorithm, std::span<const GptRequest> queue, Cluster& nodes,
                                  const SchedulerConfig& cfg, NodeIdSequence& ids) {
  switch (algorithm) {
    case Algorithm::max_util: return schedule_max_util(queue, nodes, cfg, ids);
    case Algorithm::load_balance: return schedule_load_balance(queue, nodes, cfg, ids);
    case Algorithm::power: return schedule_power_efficient(queue, nodes, cfg, ids);
  }
  throw Error(ErrorKind::config, "unknown algorithm");
}

inline AllocationOutcome schedule(Algorithm algorithm, std::span<const GptRequest> queue, Cluster& nodes,
                                  const SchedulerConfig& cfg) {
  NodeIdSequence ids;
  return schedule(algorithm, queue, nodes, cfg, ids);
}

}  // namespace gptsched
