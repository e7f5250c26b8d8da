#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gptsched/core_model.hpp"
#include "gptsched/power.hpp"

namespace gptsched {

struct Report {
  double mean_compute_utilization = 0.0;
  double utilization_stddev = 0.0;
  double total_power_w = 0.0;
  std::uint64_t node_count = 0;
  std::uint64_t created_node_count = 0;
  std::uint64_t request_count = 0;
  std::uint64_t unallocated_count = 0;
  UtilizationVector per_resource_mean_utilization;
  // Timeline runs only.
  std::optional<std::uint64_t> deadline_misses;
  std::optional<double> energy_wh;
  std::optional<double> duration_s;

  friend bool operator==(const Report&, const Report&) = default;
};

inline double mean_compute_utilization(std::span<const double> utils) {
  if (utils.empty()) throw Error(ErrorKind::undefined_metric, "mean utilization of an empty node set");
  double sum = 0.0;
  for (double u : utils) sum += u;
  return sum / static_cast<double>(utils.size());
}

// Population standard deviation (divisor k). Two passes over values shifted
// by the first element, so identical inputs give exactly 0.
inline double utilization_stddev(std::span<const double> utils) {
  if (utils.empty()) throw Error(ErrorKind::undefined_metric, "utilization stddev of an empty node set");
  const double shift = utils.front();
  const double k = static_cast<double>(utils.size());
  double sum = 0.0;
  for (double u : utils) sum += u - shift;
  const double mean = sum / k;
  double acc = 0.0;
  for (double u : utils) acc += (u - shift - mean) * (u - shift - mean);
  return std::sqrt(acc / k);
}

inline std::vector<double> compute_utilizations(std::span<const Node> nodes) {
  std::vector<double> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.utilization.compute);
  return out;
}

inline double mean_compute_utilization(std::span<const Node> nodes) {
  return mean_compute_utilization(std::span<const double>(compute_utilizations(nodes)));
}

inline double utilization_stddev(std::span<const Node> nodes) {
  return utilization_stddev(std::span<const double>(compute_utilizations(nodes)));
}

inline UtilizationVector per_resource_mean(std::span<const Node> nodes) {
  UtilizationVector sum;
  if (nodes.empty()) return sum;
  for (const auto& n : nodes) sum += n.utilization;
  const double k = static_cast<double>(nodes.size());
  return {sum.compute / k, sum.memory / k, sum.storage / k};
}

// Fills the utilization/power part of a report from one cluster state. An
// empty cluster reports zeros rather than failing.
inline void fill_cluster_metrics(Report& report, std::span<const Node> nodes, const PowerPolicy& policy) {
  report.node_count = nodes.size();
  report.total_power_w = total_power(nodes, policy);
  report.per_resource_mean_utilization = per_resource_mean(nodes);
  if (nodes.empty()) {
    report.mean_compute_utilization = 0.0;
    report.utilization_stddev = 0.0;
  } else {
    report.mean_compute_utilization = mean_compute_utilization(nodes);
    report.utilization_stddev = utilization_stddev(nodes);
  }
}

inline Report build_report(const AllocationOutcome& outcome, std::span<const Node> nodes,
                           const PowerPolicy& policy = {}) {
  std::map<std::string_view, const Node*> by_id;
  for (const auto& n : nodes) by_id.emplace(n.id, &n);
  for (const auto& [request, node_id] : outcome.allocation) {
    auto it = by_id.find(node_id);
    if (it == by_id.end())
      throw Error(ErrorKind::integrity, "request '" + request + "' mapped to unknown node '" + node_id + "'");
    if (!it->second->allocated.contains(request))
      throw Error(ErrorKind::integrity, "node '" + node_id + "' does not hold request '" + request + "'");
  }
  for (const auto& created : outcome.created_node_ids) {
    if (!by_id.contains(created)) throw Error(ErrorKind::integrity, "created node '" + created + "' missing");
  }

  Report report;
  report.request_count = outcome.request_count();
  report.unallocated_count = outcome.unallocated.size();
  report.created_node_count = outcome.created_node_ids.size();
  fill_cluster_metrics(report, nodes, policy);
  return report;
}

}  // namespace gptsched
