#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gptsched/error.hpp"

namespace gptsched {

// Slack applied to every floating comparison against a utilization bound.
inline constexpr double kEpsilon = 1e-9;

struct ResourceVector {
  double compute = 0.0;
  double memory = 0.0;   // GiB
  double storage = 0.0;  // GiB

  friend ResourceVector operator+(const ResourceVector& a, const ResourceVector& b) {
    return {a.compute + b.compute, a.memory + b.memory, a.storage + b.storage};
  }
  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;

  bool valid() const {
    for (double v : {compute, memory, storage}) {
      if (!std::isfinite(v) || v < 0.0) return false;
    }
    return true;
  }
};

// Per-axis fractions of a node's capacity. Doubles as the "demand percentage"
// of a request relative to one node, which may legitimately exceed 1.
struct UtilizationVector {
  double compute = 0.0;
  double memory = 0.0;
  double storage = 0.0;

  UtilizationVector& operator+=(const UtilizationVector& o) {
    compute += o.compute;
    memory += o.memory;
    storage += o.storage;
    return *this;
  }
  UtilizationVector& operator-=(const UtilizationVector& o) {
    compute -= o.compute;
    memory -= o.memory;
    storage -= o.storage;
    return *this;
  }
  friend UtilizationVector operator+(UtilizationVector a, const UtilizationVector& b) { return a += b; }
  friend UtilizationVector operator-(UtilizationVector a, const UtilizationVector& b) { return a -= b; }
  friend bool operator==(const UtilizationVector&, const UtilizationVector&) = default;

  double max_component() const { return std::max({compute, memory, storage}); }

  bool near(const UtilizationVector& o, double tol = kEpsilon) const {
    return std::abs(compute - o.compute) <= tol && std::abs(memory - o.memory) <= tol &&
           std::abs(storage - o.storage) <= tol;
  }
};

enum class TaskKind { translation, summarization, qa, chat, other };

inline std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::translation: return "translation";
    case TaskKind::summarization: return "summarization";
    case TaskKind::qa: return "qa";
    case TaskKind::chat: return "chat";
    case TaskKind::other: return "other";
  }
  return "other";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  for (TaskKind k : {TaskKind::translation, TaskKind::summarization, TaskKind::qa, TaskKind::chat,
                     TaskKind::other}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct GptRequest {
  std::string id;
  TaskKind task_kind = TaskKind::other;
  double model_params_b = 0.0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  std::optional<ResourceVector> explicit_demand;
  std::optional<double> arrival_time;      // seconds
  std::optional<double> service_duration;  // seconds
  std::optional<double> deadline;          // seconds after arrival

  friend bool operator==(const GptRequest&, const GptRequest&) = default;
};

// Throws validation errors for a single request; uniqueness of ids is a
// workload-level property checked by validate_workload.
inline void validate_request(const GptRequest& r) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::validation, "request '" + r.id + "': " + why);
  };
  if (r.id.empty()) throw Error(ErrorKind::validation, "request id must be non-empty");
  if (!std::isfinite(r.model_params_b) || r.model_params_b < 0.0) fail("model_params_b must be >= 0");
  if (r.prompt_tokens < 0 || r.output_tokens < 0) fail("token counts must be >= 0");
  if (r.explicit_demand && !r.explicit_demand->valid()) fail("demand components must be finite and >= 0");
  if (!r.explicit_demand && r.model_params_b <= 0.0) fail("model_params_b must be > 0 without explicit demand");
  if (r.arrival_time && (!std::isfinite(*r.arrival_time) || *r.arrival_time < 0.0)) fail("arrival_s must be >= 0");
  if (r.service_duration && (!std::isfinite(*r.service_duration) || *r.service_duration <= 0.0))
    fail("duration_s must be > 0");
  if (r.deadline && (!std::isfinite(*r.deadline) || *r.deadline <= 0.0)) fail("deadline_s must be > 0");
}

inline void validate_workload(std::span<const GptRequest> workload) {
  std::map<std::string_view, bool> seen;
  for (const auto& r : workload) {
    validate_request(r);
    if (!seen.emplace(r.id, true).second) throw Error(ErrorKind::validation, "duplicate request id '" + r.id + "'");
  }
}

struct NodeTemplate {
  ResourceVector capacity;
  double p_idle = 0.0;  // watts
  double p_max = 0.0;   // watts

  friend bool operator==(const NodeTemplate&, const NodeTemplate&) = default;
};

inline void validate_template(const NodeTemplate& t) {
  if (!t.capacity.valid() || t.capacity.compute <= 0.0 || t.capacity.memory <= 0.0 || t.capacity.storage <= 0.0)
    throw Error(ErrorKind::invalid_capacity, "node capacity components must be > 0");
  if (!std::isfinite(t.p_idle) || t.p_idle < 0.0) throw Error(ErrorKind::validation, "p_idle_w must be >= 0");
  if (!std::isfinite(t.p_max) || t.p_max < t.p_idle) throw Error(ErrorKind::validation, "p_max_w must be >= p_idle_w");
}

class Threshold {
 public:
  explicit Threshold(double value = 0.8) : value_(value) {
    if (!(value > 0.0 && value <= 1.0))
      throw Error(ErrorKind::validation, "threshold must be in (0, 1], got " + std::to_string(value));
  }
  double value() const { return value_; }
  friend bool operator==(const Threshold&, const Threshold&) = default;

 private:
  double value_;
};

inline UtilizationVector demand_percentages(const ResourceVector& demand, const ResourceVector& capacity) {
  if (capacity.compute <= 0.0 || capacity.memory <= 0.0 || capacity.storage <= 0.0)
    throw Error(ErrorKind::invalid_capacity, "capacity components must be > 0");
  return {demand.compute / capacity.compute, demand.memory / capacity.memory, demand.storage / capacity.storage};
}

// A node tracks utilization as the running sum of the percentages it was
// handed; `allocated` keeps each request's share so releases and the
// accounting check never have to re-derive demands.
struct Node {
  std::string id;
  NodeTemplate spec;
  UtilizationVector utilization;
  std::map<std::string, UtilizationVector> allocated;

  bool empty() const { return allocated.empty(); }

  void allocate(const std::string& request_id, const UtilizationVector& pct) {
    if (!allocated.emplace(request_id, pct).second)
      throw Error(ErrorKind::duplicate_allocation, "request '" + request_id + "' already on node '" + id + "'");
    utilization += pct;
  }

  void release(const std::string& request_id, const UtilizationVector& pct) {
    auto it = allocated.find(request_id);
    if (it == allocated.end())
      throw Error(ErrorKind::not_allocated, "request '" + request_id + "' not on node '" + id + "'");
    if (!it->second.near(pct))
      throw Error(ErrorKind::integrity, "release of '" + request_id + "' with a share that differs from its allocation");
    allocated.erase(it);
    utilization -= pct;
    if (allocated.empty()) {
      utilization = {};
      return;
    }
    for (double* v : {&utilization.compute, &utilization.memory, &utilization.storage}) {
      if (*v < 0.0 && *v >= -kEpsilon) *v = 0.0;
    }
  }

  void release(const std::string& request_id) {
    auto it = allocated.find(request_id);
    if (it == allocated.end())
      throw Error(ErrorKind::not_allocated, "request '" + request_id + "' not on node '" + id + "'");
    release(request_id, UtilizationVector(it->second));
  }

  // Sum of the shares of everything currently allocated.
  UtilizationVector recomputed_utilization() const {
    UtilizationVector sum;
    for (const auto& [_, pct] : allocated) sum += pct;
    return sum;
  }

  bool accounting_consistent(double tol = kEpsilon) const {
    if (allocated.empty() && !(utilization == UtilizationVector{})) return false;
    return utilization.near(recomputed_utilization(), tol);
  }
};

inline Node make_node(std::string id, NodeTemplate spec) {
  validate_template(spec);
  return Node{std::move(id), spec, {}, {}};
}

inline Node allocate_to_node(Node node, const std::string& request_id, const UtilizationVector& pct) {
  node.allocate(request_id, pct);
  return node;
}

inline Node release_from_node(Node node, const std::string& request_id, const UtilizationVector& pct) {
  node.release(request_id, pct);
  return node;
}

using Cluster = std::vector<Node>;

// Why a request ended up where it did.
enum class DecisionReason {
  allocated,               // placed on an existing node
  allocated_new_node,      // placed on a node created for it
  no_feasible_node,        // nothing fits and autoscaling is off
  infeasible_on_any_node,  // would not fit even on a fresh autoscale node
};

inline std::string_view to_string(DecisionReason r) {
  switch (r) {
    case DecisionReason::allocated: return "allocated";
    case DecisionReason::allocated_new_node: return "allocated-new-node";
    case DecisionReason::no_feasible_node: return "no-feasible-node";
    case DecisionReason::infeasible_on_any_node: return "infeasible-on-any-node";
  }
  return "unknown";
}

struct ScanEntry {
  std::string node_id;
  bool feasible = false;
  std::optional<double> power_delta_w;  // power scheduler only

  friend bool operator==(const ScanEntry&, const ScanEntry&) = default;
};

struct DecisionRecord {
  std::string request_id;
  ResourceVector demand;
  std::optional<std::string> node_id;
  DecisionReason reason = DecisionReason::no_feasible_node;
  std::vector<ScanEntry> scanned;  // empty unless full tracing is requested

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

struct AllocationOutcome {
  std::map<std::string, std::string> allocation;  // request id -> node id
  std::vector<std::string> unallocated;
  std::vector<std::string> created_node_ids;
  std::vector<DecisionRecord> trace;

  std::size_t request_count() const { return allocation.size() + unallocated.size(); }

  friend bool operator==(const AllocationOutcome&, const AllocationOutcome&) = default;
};

}  // namespace gptsched
