#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gptsched/core_model.hpp"
#include "gptsched/metrics.hpp"
#include "gptsched/power.hpp"
#include "gptsched/scheduling.hpp"

namespace gptsched {

struct AdaptorPolicy {
  double scale_down_grace_s = 60.0;
  std::uint64_t retain_min_nodes = 0;

  friend bool operator==(const AdaptorPolicy&, const AdaptorPolicy&) = default;
};

inline void validate_adaptor(const AdaptorPolicy& a) {
  if (!std::isfinite(a.scale_down_grace_s) || a.scale_down_grace_s < 0.0)
    throw Error(ErrorKind::validation, "adaptor.scale_down_grace_s must be >= 0");
}

// Declaration order is the processing order for events at the same instant.
enum class EventKind { departure, arrival, scale_down, snapshot };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::departure: return "departure";
    case EventKind::arrival: return "arrival";
    case EventKind::scale_down: return "scale-down";
    case EventKind::snapshot: return "snapshot";
  }
  return "unknown";
}

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::arrival;
  std::string subject;  // request id, or node id for scale-down checks
  std::uint64_t epoch = 0;

  auto key() const { return std::tie(time, kind, subject, epoch); }
  friend bool operator>(const SimEvent& a, const SimEvent& b) { return a.key() > b.key(); }
};

struct SnapshotRow {
  double time_s = 0.0;
  std::string node_id;
  UtilizationVector utilization;
  double power_w = 0.0;

  friend bool operator==(const SnapshotRow&, const SnapshotRow&) = default;
};

struct BatchResult {
  AllocationOutcome outcome;
  Report report;
  Cluster nodes;
};

inline BatchResult run_batch(std::span<const GptRequest> workload, Cluster nodes, Algorithm algorithm,
                             const SchedulerConfig& cfg) {
  AllocationOutcome outcome = schedule(algorithm, workload, nodes, cfg);
  Report report = build_report(outcome, nodes, cfg.power_policy);
  return {std::move(outcome), report, std::move(nodes)};
}

struct TimelineOptions {
  AdaptorPolicy adaptor;
  double snapshot_interval_s = 60.0;
  // Called after every processed arrival, departure and scale-down event.
  std::function<void(const SimEvent&, const Cluster&)> observer;
};

struct TimelineResult {
  AllocationOutcome outcome;
  Report report;
  std::vector<SnapshotRow> snapshots;
  Cluster final_nodes;
};

namespace detail {

// Running integrals of piecewise-constant cluster quantities.
struct TimeIntegrals {
  double energy_ws = 0.0;
  double mean_util_s = 0.0;
  double stddev_s = 0.0;
  UtilizationVector per_resource_s;

  void accumulate(std::span<const Node> nodes, const PowerPolicy& policy, double dt) {
    if (dt <= 0.0) return;
    Report r;
    fill_cluster_metrics(r, nodes, policy);
    energy_ws += r.total_power_w * dt;
    mean_util_s += r.mean_compute_utilization * dt;
    stddev_s += r.utilization_stddev * dt;
    per_resource_s.compute += r.per_resource_mean_utilization.compute * dt;
    per_resource_s.memory += r.per_resource_mean_utilization.memory * dt;
    per_resource_s.storage += r.per_resource_mean_utilization.storage * dt;
  }
};

inline void append_snapshot(std::vector<SnapshotRow>& out, double t, std::span<const Node> nodes,
                            const PowerPolicy& policy) {
  for (const auto& n : nodes) out.push_back({t, n.id, n.utilization, node_power(n, policy)});
}

}  // namespace detail

// Online replay: each arrival is scheduled alone against the live cluster,
// departures release shares, and nodes left empty for the grace period are
// retired (never below retain_min_nodes). Energy and the utilization metrics
// in the report are exact integrals of piecewise-constant quantities over
// [0, last event]; node_count is the peak number of provisioned nodes.
inline TimelineResult run_timeline(std::span<const GptRequest> workload, Cluster nodes, Algorithm algorithm,
                                   const SchedulerConfig& cfg, const TimelineOptions& opts) {
  validate_adaptor(opts.adaptor);
  if (!std::isfinite(opts.snapshot_interval_s) || opts.snapshot_interval_s <= 0.0)
    throw Error(ErrorKind::validation, "snapshot interval must be > 0");
  validate_workload(workload);
  std::map<std::string, const GptRequest*> requests;
  for (const auto& r : workload) {
    if (!r.arrival_time || !r.service_duration)
      throw Error(ErrorKind::validation, "request '" + r.id + "' lacks arrival_s/duration_s for a timeline run");
    requests.emplace(r.id, &r);
  }

  TimelineResult result;
  Report& report = result.report;
  report.request_count = workload.size();
  report.deadline_misses = 0;
  report.energy_wh = 0.0;
  report.duration_s = 0.0;

  if (workload.empty()) {
    fill_cluster_metrics(report, nodes, cfg.power_policy);
    result.final_nodes = std::move(nodes);
    return result;
  }

  std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> events;
  std::map<std::string, std::uint64_t> node_epoch;
  auto schedule_scale_down = [&](const Node& n, double now) {
    const std::uint64_t epoch = ++node_epoch[n.id];
    events.push({now + opts.adaptor.scale_down_grace_s, EventKind::scale_down, n.id, epoch});
  };

  for (const auto& r : workload) events.push({*r.arrival_time, EventKind::arrival, r.id, 0});
  for (const auto& n : nodes) {
    if (n.empty()) schedule_scale_down(n, 0.0);
  }

  NodeIdSequence ids;
  detail::TimeIntegrals integrals;
  double now = 0.0;
  double next_snapshot = 0.0;
  std::uint64_t peak_nodes = nodes.size();
  std::map<std::string, std::string> placement;  // live request -> node

  auto find_node = [&nodes](const std::string& id) {
    return std::find_if(nodes.begin(), nodes.end(), [&](const Node& n) { return n.id == id; });
  };
  auto advance_to = [&](double t) {
    while (next_snapshot < t) {
      integrals.accumulate(nodes, cfg.power_policy, next_snapshot - now);
      now = next_snapshot;
      detail::append_snapshot(result.snapshots, now, nodes, cfg.power_policy);
      next_snapshot += opts.snapshot_interval_s;
    }
    integrals.accumulate(nodes, cfg.power_policy, t - now);
    now = t;
  };

  while (!events.empty()) {
    SimEvent ev = events.top();
    events.pop();
    advance_to(ev.time);

    switch (ev.kind) {
      case EventKind::arrival: {
        const GptRequest& req = *requests.at(ev.subject);
        AllocationOutcome step = schedule(algorithm, std::span<const GptRequest>(&req, 1), nodes, cfg, ids);
        for (auto& [rid, nid] : step.allocation) {
          placement.emplace(rid, nid);
          ++node_epoch[nid];  // cancels any pending scale-down for that node
          result.outcome.allocation.emplace(rid, nid);
          events.push({ev.time + *req.service_duration, EventKind::departure, rid, 0});
          if (req.deadline && *req.service_duration > *req.deadline) ++*report.deadline_misses;
        }
        for (auto& rid : step.unallocated) {
          result.outcome.unallocated.push_back(rid);
          if (req.deadline) ++*report.deadline_misses;
        }
        for (auto& created : step.created_node_ids) result.outcome.created_node_ids.push_back(created);
        for (auto& rec : step.trace) result.outcome.trace.push_back(std::move(rec));
        peak_nodes = std::max<std::uint64_t>(peak_nodes, nodes.size());
        break;
      }
      case EventKind::departure: {
        auto where = placement.find(ev.subject);
        auto node = find_node(where->second);
        node->release(ev.subject);
        placement.erase(where);
        if (node->empty()) schedule_scale_down(*node, ev.time);
        break;
      }
      case EventKind::scale_down: {
        auto node = find_node(ev.subject);
        if (node == nodes.end() || !node->empty() || node_epoch[ev.subject] != ev.epoch) break;
        if (nodes.size() <= opts.adaptor.retain_min_nodes) break;
        nodes.erase(node);
        break;
      }
      case EventKind::snapshot: break;
    }
    if (opts.observer) opts.observer(ev, nodes);
  }

  // Trailing snapshots up to and including the last event time.
  while (next_snapshot <= now) {
    detail::append_snapshot(result.snapshots, next_snapshot, nodes, cfg.power_policy);
    next_snapshot += opts.snapshot_interval_s;
  }

  report.duration_s = now;
  report.energy_wh = integrals.energy_ws / 3600.0;
  report.unallocated_count = result.outcome.unallocated.size();
  report.created_node_count = result.outcome.created_node_ids.size();
  if (now > 0.0) {
    report.total_power_w = integrals.energy_ws / now;
    report.mean_compute_utilization = integrals.mean_util_s / now;
    report.utilization_stddev = integrals.stddev_s / now;
    report.per_resource_mean_utilization = {integrals.per_resource_s.compute / now,
                                            integrals.per_resource_s.memory / now,
                                            integrals.per_resource_s.storage / now};
  } else {
    fill_cluster_metrics(report, nodes, cfg.power_policy);
  }
  report.node_count = peak_nodes;
  result.final_nodes = std::move(nodes);
  return result;
}

}  // namespace gptsched
