#include <map>

#include <gtest/gtest.h>

#include "gptsched/simulator.hpp"
#include "gptsched/workload_io.hpp"
#include "test_support.hpp"

namespace gptsched {
namespace {

using testing::demand_request;
using testing::unit_template;

GptRequest timed(const std::string& id, ResourceVector demand, double arrival, double duration) {
  GptRequest r = demand_request(id, demand);
  r.arrival_time = arrival;
  r.service_duration = duration;
  return r;
}

TimelineOptions options(double grace, std::uint64_t retain, double interval) {
  TimelineOptions o;
  o.adaptor = {grace, retain};
  o.snapshot_interval_s = interval;
  return o;
}

TEST(RunBatch, EmptyWorkload) {
  const auto r = run_batch({}, Cluster{make_node("n", unit_template())}, Algorithm::power, SchedulerConfig{});
  EXPECT_TRUE(r.outcome.allocation.empty());
  EXPECT_EQ(r.report.request_count, 0u);
  EXPECT_EQ(r.report.total_power_w, 0.0);
}

TEST(RunBatch, TotalRejection) {
  const std::vector<GptRequest> q{demand_request("a", {50, 1, 1}), demand_request("b", {1, 50, 1})};
  for (Algorithm a : {Algorithm::max_util, Algorithm::load_balance, Algorithm::power}) {
    const auto r = run_batch(q, Cluster{make_node("n", unit_template())}, a, SchedulerConfig{});
    EXPECT_EQ(r.report.unallocated_count, r.report.request_count);
  }
}

TEST(RunBatch, TwoNodeScenarioReports) {
  const std::vector<GptRequest> q{demand_request("r1", {2, 2, 2})};
  auto cluster = [] {
    return Cluster{testing::loaded_node("A", {0.5, 0.5, 0.5}), testing::loaded_node("B", {0.2, 0.2, 0.2})};
  };
  const auto a = run_batch(q, cluster(), Algorithm::max_util, SchedulerConfig{});
  const auto b = run_batch(q, cluster(), Algorithm::load_balance, SchedulerConfig{});
  EXPECT_NEAR(a.report.mean_compute_utilization, 0.45, 1e-12);
  EXPECT_NEAR(a.report.utilization_stddev, 0.25, 1e-12);
  EXPECT_NEAR(b.report.mean_compute_utilization, 0.45, 1e-12);
  EXPECT_NEAR(b.report.utilization_stddev, 0.05, 1e-12);
}

// One request (arrival 0, duration 100) at (0.5, 0.2, 0.1) of a 100/200 W
// node. Power is 150 W for 100 s and 0 W after; the node is retired at 160 s.
TEST(Timeline, SingleRequestHandTrace) {
  const std::vector<GptRequest> w{timed("r", {5, 2, 1}, 0.0, 100.0)};
  Cluster nodes{make_node("node-1", unit_template())};
  std::vector<std::pair<double, std::size_t>> node_counts;
  TimelineOptions opts = options(60.0, 0, 50.0);
  opts.observer = [&](const SimEvent& ev, const Cluster& c) { node_counts.emplace_back(ev.time, c.size()); };

  const auto res = run_timeline(w, nodes, Algorithm::max_util, SchedulerConfig{}, opts);

  const std::vector<SnapshotRow> expected{
      {0.0, "node-1", {0.5, 0.2, 0.1}, 150.0},
      {50.0, "node-1", {0.5, 0.2, 0.1}, 150.0},
      {100.0, "node-1", {0, 0, 0}, 0.0},
      {150.0, "node-1", {0, 0, 0}, 0.0},
  };
  ASSERT_EQ(res.snapshots.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_DOUBLE_EQ(res.snapshots[i].time_s, expected[i].time_s);
    EXPECT_EQ(res.snapshots[i].node_id, expected[i].node_id);
    EXPECT_TRUE(res.snapshots[i].utilization.near(expected[i].utilization, 1e-12));
    EXPECT_NEAR(res.snapshots[i].power_w, expected[i].power_w, 1e-9);
  }
  EXPECT_NEAR(*res.report.energy_wh, 150.0 * 100.0 / 3600.0, 1e-12);
  EXPECT_DOUBLE_EQ(*res.report.duration_s, 160.0);
  EXPECT_TRUE(res.final_nodes.empty());
  ASSERT_FALSE(node_counts.empty());
  EXPECT_EQ(node_counts.back(), (std::pair<double, std::size_t>{160.0, 0}));
  EXPECT_EQ(res.report.node_count, 1u);
  EXPECT_EQ(*res.report.deadline_misses, 0u);
}

TEST(Timeline, SameScenarioThroughAutoscale) {
  const std::vector<GptRequest> w{timed("r", {5, 2, 1}, 0.0, 100.0)};
  SchedulerConfig cfg;
  cfg.autoscale_template = unit_template();
  const auto res = run_timeline(w, Cluster{}, Algorithm::load_balance, cfg, options(60.0, 0, 50.0));
  ASSERT_EQ(res.snapshots.size(), 4u);
  EXPECT_EQ(res.snapshots[0].node_id, "auto-1");
  EXPECT_NEAR(*res.report.energy_wh, 150.0 * 100.0 / 3600.0, 1e-12);
  EXPECT_EQ(res.report.created_node_count, 1u);
}

TEST(Timeline, DisjointLifetimesShareOneNode) {
  const std::vector<GptRequest> w{timed("r1", {6, 6, 6}, 0.0, 10.0), timed("r2", {6, 6, 6}, 20.0, 10.0)};
  SchedulerConfig cfg;
  cfg.autoscale_template = unit_template();
  const auto res = run_timeline(w, Cluster{}, Algorithm::max_util, cfg, options(60.0, 0, 5.0));
  EXPECT_EQ(res.report.node_count, 1u);
  EXPECT_EQ(res.report.unallocated_count, 0u);
  EXPECT_EQ(res.outcome.allocation.at("r1"), res.outcome.allocation.at("r2"));
}

TEST(Timeline, DepartureFreesCapacityBeforeSameInstantArrival) {
  const std::vector<GptRequest> w{timed("r1", {6, 6, 6}, 0.0, 10.0), timed("r2", {6, 6, 6}, 10.0, 10.0)};
  const auto res =
      run_timeline(w, Cluster{make_node("n", unit_template())}, Algorithm::max_util, SchedulerConfig{},
                   options(0.0, 1, 5.0));
  EXPECT_EQ(res.report.unallocated_count, 0u);
}

TEST(Timeline, EmptyWorkload) {
  const auto res = run_timeline({}, Cluster{make_node("n", unit_template())}, Algorithm::power, SchedulerConfig{},
                                options(60.0, 0, 10.0));
  EXPECT_TRUE(res.snapshots.empty());
  EXPECT_EQ(*res.report.energy_wh, 0.0);
  EXPECT_EQ(res.report.request_count, 0u);
}

TEST(Timeline, RetainMinimumNodes) {
  const std::vector<GptRequest> w{timed("r", {5, 2, 1}, 0.0, 100.0)};
  const auto res = run_timeline(w, Cluster{make_node("n", unit_template())}, Algorithm::max_util, SchedulerConfig{},
                                options(60.0, 1, 50.0));
  EXPECT_EQ(res.final_nodes.size(), 1u);
}

TEST(Timeline, RejectsUntimedRequests) {
  const std::vector<GptRequest> w{demand_request("r", {1, 1, 1})};
  try {
    run_timeline(w, Cluster{}, Algorithm::max_util, SchedulerConfig{}, options(0, 0, 1));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  EXPECT_THROW(run_timeline({}, Cluster{}, Algorithm::max_util, SchedulerConfig{}, options(0, 0, 0)), Error);
}

TEST(Timeline, DeadlineMisses) {
  GptRequest late = timed("late", {1, 1, 1}, 0.0, 100.0);
  late.deadline = 50.0;
  GptRequest fine = timed("fine", {1, 1, 1}, 0.0, 10.0);
  fine.deadline = 50.0;
  GptRequest rejected = timed("rejected", {50, 1, 1}, 0.0, 10.0);
  rejected.deadline = 50.0;
  const auto res = run_timeline(std::vector<GptRequest>{late, fine, rejected}, Cluster{make_node("n", unit_template())},
                                Algorithm::max_util, SchedulerConfig{}, options(10, 0, 10));
  EXPECT_EQ(*res.report.deadline_misses, 2u);
}

// Checks, at every event, node utilization against an independently tracked
// set of live requests, threshold safety, and accumulates energy from the
// observed states.
class TimelineProperties : public ::testing::TestWithParam<Algorithm> {};

TEST_P(TimelineProperties, ConservationSafetyEnergy) {
  const Algorithm algorithm = GetParam();
  ClusterConfig cfg = default_cluster_config();
  const auto workload = testing::timed_workload(17, 400, 2.0);
  std::map<std::string, const GptRequest*> by_id;
  for (const auto& r : workload) by_id.emplace(r.id, &r);

  double last_time = 0.0;
  double last_power = total_power(cfg.nodes, cfg.scheduler.power_policy);
  double energy_ws = 0.0;
  std::size_t events = 0;
  TimelineOptions opts;
  opts.adaptor = cfg.adaptor;
  opts.snapshot_interval_s = 30.0;
  opts.observer = [&](const SimEvent& ev, const Cluster& nodes) {
    ++events;
    energy_ws += last_power * (ev.time - last_time);
    last_time = ev.time;
    last_power = total_power(nodes, cfg.scheduler.power_policy);
    const double bound = algorithm == Algorithm::power ? 1.0 : cfg.scheduler.threshold.value();
    for (const auto& n : nodes) {
      ASSERT_LE(n.utilization.max_component(), bound + kEpsilon);
      UtilizationVector expected;
      for (const auto& [rid, share] : n.allocated) {
        if (rid == kBackgroundRequestId) {
          expected += share;
          continue;
        }
        const GptRequest& r = *by_id.at(rid);
        ASSERT_LE(*r.arrival_time, ev.time);
        ASSERT_GT(*r.arrival_time + *r.service_duration, ev.time);
        expected += demand_percentages(estimate_demand(r, cfg.scheduler.profiler), n.spec.capacity);
      }
      ASSERT_TRUE(n.utilization.near(expected)) << n.id << " at t=" << ev.time;
    }
  };
  const auto res = run_timeline(workload, cfg.nodes, algorithm, cfg.scheduler, opts);
  EXPECT_GT(events, workload.size());
  const double reported = *res.report.energy_wh;
  EXPECT_NEAR(reported, energy_ws / 3600.0, 1e-9 * std::max(1.0, reported));
}

TEST_P(TimelineProperties, ReplayDeterminism) {
  ClusterConfig cfg = default_cluster_config();
  const auto workload = testing::timed_workload(5, 200, 1.0);
  TimelineOptions opts;
  opts.adaptor = cfg.adaptor;
  opts.snapshot_interval_s = 15.0;
  const auto a = run_timeline(workload, cfg.nodes, GetParam(), cfg.scheduler, opts);
  const auto b = run_timeline(workload, cfg.nodes, GetParam(), cfg.scheduler, opts);
  EXPECT_EQ(a.snapshots, b.snapshots);
  EXPECT_EQ(a.report, b.report);
}

INSTANTIATE_TEST_SUITE_P(AllAlgorithms, TimelineProperties,
                         ::testing::Values(Algorithm::max_util, Algorithm::load_balance, Algorithm::power),
                         [](const auto& info) {
                           std::string name(to_string(info.param));
                           std::replace(name.begin(), name.end(), '-', '_');
                           return name;
                         });

}  // namespace
}  // namespace gptsched
