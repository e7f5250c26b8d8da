#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gptsched/core_model.hpp"
#include "gptsched/metrics.hpp"
#include "gptsched/scheduling.hpp"
#include "gptsched/simulator.hpp"
#include "gptsched/workload_io.hpp"

namespace gptsched::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRejections = 3;

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Diagnostics only; data never goes through here.
class Log {
 public:
  Log(std::ostream& sink, LogLevel level) : sink_(sink), level_(level) {}

  static LogLevel level_from_env() {
    const char* v = std::getenv("GPTSCHED_LOG");
    if (!v) return LogLevel::error;
    const std::string s(v);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::error;
  }

  void error(const std::string& msg) const { emit(LogLevel::error, "error", msg); }
  void info(const std::string& msg) const { emit(LogLevel::info, "info", msg); }
  void debug(const std::string& msg) const { emit(LogLevel::debug, "debug", msg); }

 private:
  void emit(LogLevel at, const char* tag, const std::string& msg) const {
    if (static_cast<int>(at) <= static_cast<int>(level_)) sink_ << "gptsched: " << tag << ": " << msg << '\n';
  }

  std::ostream& sink_;
  LogLevel level_;
};

struct Options {
  std::string workload;
  std::string config;
  std::string algorithm;
  std::optional<double> threshold;
  std::string autoscale;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> count;
  std::optional<double> arrival_rate;
  std::optional<double> duration_mu;
  std::optional<double> duration_sigma;
  double snapshot_interval = 60.0;
  std::string out;
  std::string format;
};

namespace detail {

inline ClusterConfig load_config_with_overrides(const Options& opt) {
  ClusterConfig cfg = opt.config.empty() ? default_cluster_config() : load_cluster_config_file(opt.config);
  if (opt.threshold) cfg.scheduler.threshold = Threshold(*opt.threshold);
  if (opt.autoscale == "off") {
    cfg.scheduler.autoscale_template.reset();
  } else if (opt.autoscale == "on" && !cfg.scheduler.autoscale_template) {
    if (!cfg.nodes.empty()) {
      cfg.scheduler.autoscale_template = cfg.nodes.front().spec;
    } else {
      cfg.scheduler.autoscale_template = cfg.templates.begin()->second;
    }
  }
  return cfg;
}

class OutputFile {
 public:
  OutputFile(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw Error(ErrorKind::io, "cannot write '" + path + "'");
    stream_ = &file_;
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

inline int exit_for(const Report& r) { return r.unallocated_count > 0 ? kExitRejections : kExitOk; }

}  // namespace detail

inline int cmd_gen(const Options& opt, std::ostream& out, const Log& log) {
  GeneratorSpec spec;
  if (!opt.config.empty()) {
    ClusterConfig cfg = load_cluster_config_file(opt.config);
    if (cfg.generator) spec = *cfg.generator;
  }
  if (opt.count) {
    if (*opt.count <= 0) throw Error(ErrorKind::validation, "--count must be > 0");
    spec.request_count = static_cast<std::uint64_t>(*opt.count);
  }
  if (opt.seed) spec.seed = *opt.seed;
  if (opt.arrival_rate) spec.arrival_rate_per_s = *opt.arrival_rate;
  if (opt.duration_mu || opt.duration_sigma) {
    LogNormal d = spec.duration_s.value_or(LogNormal{4.0, 0.5});
    if (opt.duration_mu) d.mu = *opt.duration_mu;
    if (opt.duration_sigma) d.sigma = *opt.duration_sigma;
    spec.duration_s = d;
  }
  const auto requests = generate_synthetic(spec);
  detail::OutputFile sink(opt.out, out);
  write_trace(sink.stream(), requests);
  log.info("generated " + std::to_string(requests.size()) + " requests (seed " + std::to_string(spec.seed) + ")");
  return kExitOk;
}

inline int cmd_schedule(const Options& opt, std::ostream& out, const Log& log) {
  const Algorithm algorithm = parse_algorithm(opt.algorithm);
  const auto workload = load_trace_file(opt.workload);
  ClusterConfig cfg = detail::load_config_with_overrides(opt);
  const ReportFormat format = parse_report_format(opt.format.empty() ? "json" : opt.format);

  BatchResult result = run_batch(workload, cfg.nodes, algorithm, cfg.scheduler);
  log.info(std::string(to_string(algorithm)) + ": " + std::to_string(result.outcome.allocation.size()) +
           " allocated, " + std::to_string(result.report.unallocated_count) + " unallocated");

  detail::OutputFile sink(opt.out, out);
  if (format == ReportFormat::json) {
    write_json(sink.stream(), Json{{"algorithm", std::string(to_string(algorithm))},
                                   {"report", report_to_json(result.report)},
                                   {"outcome", outcome_to_json(result.outcome)}});
  } else {
    write_report(sink.stream(), result.report, format);
  }
  return detail::exit_for(result.report);
}

inline int cmd_simulate(const Options& opt, std::ostream&, const Log& log) {
  if (!(opt.snapshot_interval > 0.0)) throw Error(ErrorKind::validation, "--snapshot-interval must be > 0");
  if (opt.out.empty()) throw Error(ErrorKind::validation, "--out <dir> is required for simulate");
  const Algorithm algorithm = parse_algorithm(opt.algorithm);
  const auto workload = load_trace_file(opt.workload);
  ClusterConfig cfg = detail::load_config_with_overrides(opt);
  const ReportFormat format = parse_report_format(opt.format.empty() ? "json" : opt.format);

  TimelineOptions topts;
  topts.adaptor = cfg.adaptor;
  topts.snapshot_interval_s = opt.snapshot_interval;
  TimelineResult result = run_timeline(workload, cfg.nodes, algorithm, cfg.scheduler, topts);

  std::error_code ec;
  std::filesystem::create_directories(opt.out, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + opt.out + "': " + ec.message());
  const std::filesystem::path dir(opt.out);
  {
    detail::OutputFile f((dir / (format == ReportFormat::json ? "report.json" : "report.csv")).string(), std::cout);
    write_report(f.stream(), result.report, format);
  }
  {
    detail::OutputFile f((dir / "snapshots.csv").string(), std::cout);
    write_snapshots(f.stream(), result.snapshots, ReportFormat::csv);
  }
  {
    detail::OutputFile f((dir / "outcome.json").string(), std::cout);
    write_json(f.stream(), outcome_to_json(result.outcome));
  }
  log.info("simulated " + std::to_string(workload.size()) + " requests over " +
           format_number(result.report.duration_s.value_or(0.0)) + " s");
  return detail::exit_for(result.report);
}

inline int cmd_compare(const Options& opt, std::ostream& out, const Log& log) {
  const auto workload = load_trace_file(opt.workload);
  ClusterConfig cfg = detail::load_config_with_overrides(opt);
  const ReportFormat format = parse_report_format(opt.format.empty() ? "csv" : opt.format);
  cfg.scheduler.trace_detail = TraceDetail::decisions;

  const std::string initial = cluster_to_json(cfg.nodes).dump();
  const Algorithm algorithms[] = {Algorithm::max_util, Algorithm::load_balance, Algorithm::power};
  std::vector<std::future<BatchResult>> runs;
  for (Algorithm a : algorithms) {
    // Each run receives its own copy of the initial cluster.
    runs.push_back(std::async(std::launch::async, [&workload, &cfg, a, nodes = cfg.nodes]() mutable {
      return run_batch(workload, std::move(nodes), a, cfg.scheduler);
    }));
  }
  std::vector<ComparisonRow> rows;
  bool rejections = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    BatchResult r = runs[i].get();
    rejections = rejections || r.report.unallocated_count > 0;
    log.debug(std::string(to_string(algorithms[i])) + ": mean util " +
              format_number(r.report.mean_compute_utilization) + ", power " + format_number(r.report.total_power_w));
    rows.push_back({algorithms[i], r.report});
  }
  if (cluster_to_json(cfg.nodes).dump() != initial)
    throw Error(ErrorKind::integrity, "initial cluster mutated during comparison");

  detail::OutputFile sink(opt.out, out);
  write_comparison(sink.stream(), rows, format);
  return rejections ? kExitRejections : kExitOk;
}

// Entry point shared by the executable and the tests. args excludes argv[0].
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   LogLevel level = Log::level_from_env()) {
  Log log(err, level);
  Options opt;
  CLI::App app{"Resource allocation and cluster simulation for GPT-style requests", "gptsched"};
  app.require_subcommand(1, 1);

  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Cluster/experiment config (JSON)");
    sub->add_option("--threshold", opt.threshold, "Override scheduler.threshold");
    sub->add_option("--autoscale", opt.autoscale, "Override autoscaling")->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--out", opt.out, "Output path");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic trace");
  gen->add_option("--config", opt.config, "Config whose 'generator' section seeds the defaults");
  gen->add_option("--count", opt.count, "Number of requests");
  gen->add_option("--seed", opt.seed, "Generator seed");
  gen->add_option("--arrival-rate", opt.arrival_rate, "Poisson arrival rate per second");
  gen->add_option("--duration-mu", opt.duration_mu, "Lognormal duration mu");
  gen->add_option("--duration-sigma", opt.duration_sigma, "Lognormal duration sigma");
  gen->add_option("--out", opt.out, "Output trace path");

  CLI::App* sched = app.add_subcommand("schedule", "Run one algorithm over a trace in batch mode");
  sched->add_option("--workload", opt.workload, "Trace (JSON Lines)")->required();
  sched->add_option("--algorithm", opt.algorithm, "max-util|load-balance|power")->required();
  add_common(sched);

  CLI::App* sim = app.add_subcommand("simulate", "Replay a timed trace through the event simulator");
  sim->add_option("--workload", opt.workload, "Trace (JSON Lines)")->required();
  sim->add_option("--algorithm", opt.algorithm, "max-util|load-balance|power")->required();
  sim->add_option("--snapshot-interval", opt.snapshot_interval, "Seconds between snapshots");
  add_common(sim);

  CLI::App* cmp = app.add_subcommand("compare", "Run all three algorithms on the same trace");
  cmp->add_option("--workload", opt.workload, "Trace (JSON Lines)")->required();
  add_common(cmp);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    log.error(e.what());
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(opt, out, log);
    if (sched->parsed()) return cmd_schedule(opt, out, log);
    if (sim->parsed()) return cmd_simulate(opt, out, log);
    if (cmp->parsed()) return cmd_compare(opt, out, log);
  } catch (const Error& e) {
    log.error(e.what());
    switch (e.kind()) {
      case ErrorKind::integrity:
      case ErrorKind::duplicate_allocation:
      case ErrorKind::not_allocated: return kExitInternal;
      default: return kExitUsage;
    }
  } catch (const std::exception& e) {
    log.error(e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace gptsched::cli
