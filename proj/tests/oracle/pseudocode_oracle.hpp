#pragma once

// Naive, line-by-line transcription of the three allocation algorithms over
// plain structs. It shares no code with the library's schedulers and is used
// only to cross-check them on small instances.

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

constexpr double kEps = 1e-9;

struct Request {
  std::string id;
  double compute = 0, memory = 0, storage = 0;
};

struct Node {
  std::string id;
  double compute_capacity = 1, memory_capacity = 1, storage_capacity = 1;
  double compute_utilization = 0, memory_utilization = 0, storage_utilization = 0;
  double p_idle = 0, p_max = 0;
  int allocations = 0;  // includes pre-existing background load
};

struct NewNodeTemplate {
  double compute_capacity, memory_capacity, storage_capacity, p_idle, p_max;
};

struct Result {
  std::map<std::string, std::string> allocation_map;
  std::set<std::string> unallocated;
};

inline bool request_before(const Request& a, const Request& b) {
  if (a.compute > b.compute) return true;
  if (a.compute < b.compute) return false;
  return a.id < b.id;
}

inline void sort_by_descending_compute_demand(std::vector<Request>& queue) {
  // insertion sort
  for (std::size_t i = 1; i < queue.size(); ++i) {
    std::size_t j = i;
    while (j > 0 && request_before(queue[j], queue[j - 1])) {
      std::swap(queue[j], queue[j - 1]);
      --j;
    }
  }
}

inline void sort_nodes_by_utilization(std::vector<Node>& nodes, bool descending) {
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    std::size_t j = i;
    while (j > 0) {
      const Node& a = nodes[j];
      const Node& b = nodes[j - 1];
      bool a_first;
      if (a.compute_utilization != b.compute_utilization) {
        a_first = descending ? a.compute_utilization > b.compute_utilization
                             : a.compute_utilization < b.compute_utilization;
      } else {
        a_first = a.id < b.id;
      }
      if (!a_first) break;
      std::swap(nodes[j], nodes[j - 1]);
      --j;
    }
  }
}

inline void sort_nodes_by_id(std::vector<Node>& nodes) {
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    std::size_t j = i;
    while (j > 0 && nodes[j].id < nodes[j - 1].id) {
      std::swap(nodes[j], nodes[j - 1]);
      --j;
    }
  }
}

inline std::string create_node_id(const std::vector<Node>& nodes, int& counter) {
  while (true) {
    std::string id = "auto-" + std::to_string(counter);
    ++counter;
    bool taken = false;
    for (const Node& n : nodes) {
      if (n.id == id) taken = true;
    }
    if (!taken) return id;
  }
}

// Threshold first-fit for max-util and load-balance. `descending` selects the
// node sort direction.
inline Result threshold_algorithm(std::vector<Request> gptRequestQueue, std::vector<Node>& availableNodes,
                                  double threshold, std::optional<NewNodeTemplate> createTemplate, bool descending,
                                  bool resort) {
  Result out;
  sort_by_descending_compute_demand(gptRequestQueue);
  sort_nodes_by_utilization(availableNodes, descending);
  int counter = 1;

  for (const Request& request : gptRequestQueue) {
    bool allocated = false;
    for (Node& node : availableNodes) {
      double computeDemandPercentage = request.compute / node.compute_capacity;
      double memoryDemandPercentage = request.memory / node.memory_capacity;
      double storageDemandPercentage = request.storage / node.storage_capacity;
      if (node.compute_utilization + computeDemandPercentage <= threshold + kEps &&
          node.memory_utilization + memoryDemandPercentage <= threshold + kEps &&
          node.storage_utilization + storageDemandPercentage <= threshold + kEps) {
        out.allocation_map[request.id] = node.id;
        node.compute_utilization += computeDemandPercentage;
        node.memory_utilization += memoryDemandPercentage;
        node.storage_utilization += storageDemandPercentage;
        node.allocations += 1;
        allocated = true;
        break;
      }
    }
    if (!allocated) {
      if (!createTemplate) {
        out.unallocated.insert(request.id);
        continue;
      }
      Node newNode;
      newNode.compute_capacity = createTemplate->compute_capacity;
      newNode.memory_capacity = createTemplate->memory_capacity;
      newNode.storage_capacity = createTemplate->storage_capacity;
      newNode.p_idle = createTemplate->p_idle;
      newNode.p_max = createTemplate->p_max;
      double computeDemandPercentage = request.compute / newNode.compute_capacity;
      double memoryDemandPercentage = request.memory / newNode.memory_capacity;
      double storageDemandPercentage = request.storage / newNode.storage_capacity;
      if (computeDemandPercentage > threshold + kEps || memoryDemandPercentage > threshold + kEps ||
          storageDemandPercentage > threshold + kEps) {
        out.unallocated.insert(request.id);
        continue;
      }
      newNode.id = create_node_id(availableNodes, counter);
      newNode.compute_utilization += computeDemandPercentage;
      newNode.memory_utilization += memoryDemandPercentage;
      newNode.storage_utilization += storageDemandPercentage;
      newNode.allocations += 1;
      availableNodes.push_back(newNode);
      out.allocation_map[request.id] = newNode.id;
      allocated = true;
    }
    if (allocated && resort) sort_nodes_by_utilization(availableNodes, descending);
  }
  return out;
}

inline double node_power(const Node& n, double compute_utilization, bool active, bool off_when_empty) {
  if (!active && off_when_empty) return 0.0;
  return n.p_idle + (n.p_max - n.p_idle) * compute_utilization;
}

inline double estimatePower(const Node& node, const Request& request, bool incremental, bool off_when_empty) {
  double pct = request.compute / node.compute_capacity;
  double after = node_power(node, node.compute_utilization + pct, true, off_when_empty);
  if (!incremental) return after;
  double before = node_power(node, node.compute_utilization, node.allocations > 0, off_when_empty);
  return after - before;
}

// Power-greedy placement with the utilization update on allocation and the optional
// autoscale fallback.
inline Result power_algorithm(std::vector<Request> gptRequestQueue, std::vector<Node>& availableNodes,
                              bool incremental, bool off_when_empty, std::optional<NewNodeTemplate> createTemplate) {
  Result out;
  sort_by_descending_compute_demand(gptRequestQueue);
  sort_nodes_by_id(availableNodes);
  int counter = 1;

  for (const Request& request : gptRequestQueue) {
    double minPower = std::numeric_limits<double>::infinity();
    Node* allocatedNode = nullptr;
    for (Node& node : availableNodes) {
      double c = request.compute / node.compute_capacity;
      double m = request.memory / node.memory_capacity;
      double s = request.storage / node.storage_capacity;
      bool enough = node.compute_utilization + c <= 1.0 + kEps && node.memory_utilization + m <= 1.0 + kEps &&
                    node.storage_utilization + s <= 1.0 + kEps;
      if (enough) {
        double power = estimatePower(node, request, incremental, off_when_empty);
        if (power < minPower) {
          allocatedNode = &node;
          minPower = power;
        }
      }
    }
    if (allocatedNode != nullptr) {
      out.allocation_map[request.id] = allocatedNode->id;
      allocatedNode->compute_utilization += request.compute / allocatedNode->compute_capacity;
      allocatedNode->memory_utilization += request.memory / allocatedNode->memory_capacity;
      allocatedNode->storage_utilization += request.storage / allocatedNode->storage_capacity;
      allocatedNode->allocations += 1;
      continue;
    }
    if (!createTemplate) {
      out.unallocated.insert(request.id);
      continue;
    }
    Node newNode;
    newNode.compute_capacity = createTemplate->compute_capacity;
    newNode.memory_capacity = createTemplate->memory_capacity;
    newNode.storage_capacity = createTemplate->storage_capacity;
    newNode.p_idle = createTemplate->p_idle;
    newNode.p_max = createTemplate->p_max;
    double c = request.compute / newNode.compute_capacity;
    double m = request.memory / newNode.memory_capacity;
    double s = request.storage / newNode.storage_capacity;
    if (c > 1.0 + kEps || m > 1.0 + kEps || s > 1.0 + kEps) {
      out.unallocated.insert(request.id);
      continue;
    }
    newNode.id = create_node_id(availableNodes, counter);
    newNode.compute_utilization = c;
    newNode.memory_utilization = m;
    newNode.storage_utilization = s;
    newNode.allocations = 1;
    availableNodes.push_back(newNode);
    sort_nodes_by_id(availableNodes);
    out.allocation_map[request.id] = newNode.id;
  }
  return out;
}

}  // namespace oracle
