#pragma once

#include <span>
#include <string_view>

#include "gptsched/core_model.hpp"

namespace gptsched {

enum class PowerMode {
  incremental,     // estimate = power after allocation - power before
  absolute_after,  // estimate = power after allocation
};

inline std::string_view to_string(PowerMode m) {
  return m == PowerMode::incremental ? "incremental" : "absolute-after";
}

struct PowerPolicy {
  PowerMode mode = PowerMode::incremental;
  bool off_when_empty = true;

  friend bool operator==(const PowerPolicy&, const PowerPolicy&) = default;
};

namespace detail {

inline double linear_power(const NodeTemplate& t, bool active, double compute_util, const PowerPolicy& policy) {
  if (!active && policy.off_when_empty) return 0.0;
  return t.p_idle + (t.p_max - t.p_idle) * compute_util;
}

}  // namespace detail

// Linear idle/peak model on compute utilization. An empty node draws nothing
// when the policy powers empty nodes off.
inline double node_power(const Node& node, const PowerPolicy& policy = {}) {
  return detail::linear_power(node.spec, !node.empty(), node.utilization.compute, policy);
}

// Power cost of hypothetically placing `pct` on `node`. The node is not
// touched; after the placement it is necessarily active.
inline double estimate_power_delta(const Node& node, const UtilizationVector& pct, const PowerPolicy& policy = {}) {
  const double after = detail::linear_power(node.spec, true, node.utilization.compute + pct.compute, policy);
  if (policy.mode == PowerMode::absolute_after) return after;
  return after - node_power(node, policy);
}

inline double total_power(std::span<const Node> nodes, const PowerPolicy& policy = {}) {
  double sum = 0.0;
  for (const auto& n : nodes) sum += node_power(n, policy);
  return sum;
}

}  // namespace gptsched
