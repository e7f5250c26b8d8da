#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gptsched/core_model.hpp"
#include "gptsched/metrics.hpp"
#include "gptsched/power.hpp"
#include "gptsched/profiler.hpp"
#include "gptsched/scheduling.hpp"
#include "gptsched/simulator.hpp"

namespace gptsched {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

// Nine significant digits, no negative zero. Every float that reaches a report
// goes through here so output is byte-stable.
inline std::string format_number(double v) {
  if (v == 0.0) v = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline double canonical_number(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

// ---------------------------------------------------------------------------
// Strict JSON field access
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> known,
                                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorKind::validation, "unknown field '" + where + key + "'");
  }
}

inline const Json* member(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double get_number(const Json& obj, const char* key, const std::string& where, std::optional<double> fallback) {
  const Json* v = member(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw Error(ErrorKind::validation, "missing field '" + where + key + "'");
  }
  if (!v->is_number()) throw Error(ErrorKind::validation, "field '" + where + key + "' must be a number");
  const double d = v->get<double>();
  if (!std::isfinite(d)) throw Error(ErrorKind::validation, "field '" + where + key + "' must be finite");
  return d;
}

inline std::int64_t get_integer(const Json& obj, const char* key, const std::string& where,
                                std::optional<std::int64_t> fallback) {
  const Json* v = member(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw Error(ErrorKind::validation, "missing field '" + where + key + "'");
  }
  if (!v->is_number_integer()) throw Error(ErrorKind::validation, "field '" + where + key + "' must be an integer");
  return v->get<std::int64_t>();
}

inline bool get_bool(const Json& obj, const char* key, const std::string& where, bool fallback) {
  const Json* v = member(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw Error(ErrorKind::validation, "field '" + where + key + "' must be a boolean");
  return v->get<bool>();
}

inline std::string get_string(const Json& obj, const char* key, const std::string& where,
                              std::optional<std::string> fallback) {
  const Json* v = member(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw Error(ErrorKind::validation, "missing field '" + where + key + "'");
  }
  if (!v->is_string()) throw Error(ErrorKind::validation, "field '" + where + key + "' must be a string");
  return v->get<std::string>();
}

inline const Json& get_object(const Json& obj, const char* key, const std::string& where) {
  const Json* v = member(obj, key);
  if (!v || !v->is_object()) throw Error(ErrorKind::validation, "field '" + where + key + "' must be an object");
  return *v;
}

inline Json parse_json(std::istream& in, const std::string& what) {
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, what + ": " + e.what());
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trace (JSON Lines)
// ---------------------------------------------------------------------------

inline Json demand_to_json(const ResourceVector& d) {
  return Json{{"compute", d.compute}, {"memory_gib", d.memory}, {"storage_gib", d.storage}};
}

inline ResourceVector demand_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "field '" + where + "' must be an object");
  detail::reject_unknown_keys(j, {"compute", "memory_gib", "storage_gib"}, where + ".");
  return {detail::get_number(j, "compute", where + ".", std::nullopt),
          detail::get_number(j, "memory_gib", where + ".", std::nullopt),
          detail::get_number(j, "storage_gib", where + ".", std::nullopt)};
}

inline Json request_to_json(const GptRequest& r) {
  Json j;
  j["id"] = r.id;
  j["task_kind"] = std::string(to_string(r.task_kind));
  j["model_params_b"] = r.model_params_b;
  j["prompt_tokens"] = r.prompt_tokens;
  j["output_tokens"] = r.output_tokens;
  if (r.explicit_demand) j["demand"] = demand_to_json(*r.explicit_demand);
  if (r.arrival_time) j["arrival_s"] = *r.arrival_time;
  if (r.service_duration) j["duration_s"] = *r.service_duration;
  if (r.deadline) j["deadline_s"] = *r.deadline;
  return j;
}

inline GptRequest request_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "record must be a JSON object");
  detail::reject_unknown_keys(j, {"id", "task_kind", "model_params_b", "prompt_tokens", "output_tokens", "demand",
                                  "arrival_s", "duration_s", "deadline_s"},
                              "");
  GptRequest r;
  r.id = detail::get_string(j, "id", "", std::nullopt);
  const std::string kind = detail::get_string(j, "task_kind", "", std::string("other"));
  auto parsed = parse_task_kind(kind);
  if (!parsed) throw Error(ErrorKind::validation, "unknown task_kind '" + kind + "'");
  r.task_kind = *parsed;
  r.model_params_b = detail::get_number(j, "model_params_b", "", 0.0);
  r.prompt_tokens = detail::get_integer(j, "prompt_tokens", "", 0);
  r.output_tokens = detail::get_integer(j, "output_tokens", "", 0);
  if (const Json* d = detail::member(j, "demand")) r.explicit_demand = demand_from_json(*d, "demand");
  if (detail::member(j, "arrival_s")) r.arrival_time = detail::get_number(j, "arrival_s", "", std::nullopt);
  if (detail::member(j, "duration_s")) r.service_duration = detail::get_number(j, "duration_s", "", std::nullopt);
  if (detail::member(j, "deadline_s")) r.deadline = detail::get_number(j, "deadline_s", "", std::nullopt);
  validate_request(r);
  return r;
}

// Blank lines are skipped. Errors name the 1-based line they came from.
inline std::vector<GptRequest> load_trace(std::istream& in) {
  std::vector<GptRequest> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string at = "line " + std::to_string(lineno) + ": ";
    GptRequest r;
    try {
      r = request_from_json(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, at + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), at + e.what());
    }
    if (!seen.insert(r.id).second) throw Error(ErrorKind::validation, at + "duplicate request id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<GptRequest> load_trace_file(const std::string& path) {
  auto in = detail::open_input(path);
  return load_trace(in);
}

inline void write_trace(std::ostream& out, std::span<const GptRequest> requests) {
  for (const auto& r : requests) out << request_to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing trace");
}

// ---------------------------------------------------------------------------
// Synthetic workloads
// ---------------------------------------------------------------------------

struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;

  friend bool operator==(const LogNormal&, const LogNormal&) = default;
};

struct ModelSizeChoice {
  double params_b = 7.0;
  double probability = 1.0;

  friend bool operator==(const ModelSizeChoice&, const ModelSizeChoice&) = default;
};

struct GeneratorSpec {
  std::uint64_t request_count = 1000;
  std::uint64_t seed = 0;
  std::vector<ModelSizeChoice> model_size_choices_b{{7.0, 0.6}, {13.0, 0.3}, {70.0, 0.1}};
  LogNormal prompt_tokens{5.5, 0.8};
  LogNormal output_tokens{5.0, 1.0};
  std::optional<double> arrival_rate_per_s;
  std::optional<LogNormal> duration_s;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

inline constexpr std::int64_t kMinTokens = 1;
inline constexpr std::int64_t kMaxTokens = 32768;

inline void validate_generator(const GeneratorSpec& s) {
  if (s.request_count == 0) throw Error(ErrorKind::validation, "generator.request_count must be > 0");
  if (s.model_size_choices_b.empty()) throw Error(ErrorKind::validation, "generator.model_sizes must be non-empty");
  double mass = 0.0;
  for (const auto& c : s.model_size_choices_b) {
    if (!std::isfinite(c.params_b) || c.params_b <= 0.0)
      throw Error(ErrorKind::validation, "generator.model_sizes params_b must be > 0");
    if (!std::isfinite(c.probability) || c.probability < 0.0)
      throw Error(ErrorKind::validation, "generator.model_sizes probability must be >= 0");
    mass += c.probability;
  }
  if (std::abs(mass - 1.0) > kEpsilon) throw Error(ErrorKind::validation, "generator.model_sizes must sum to 1");
  auto check_ln = [](const LogNormal& ln, const char* name) {
    if (!std::isfinite(ln.mu) || !std::isfinite(ln.sigma) || ln.sigma < 0.0)
      throw Error(ErrorKind::validation, std::string("generator.") + name + " needs finite mu and sigma >= 0");
  };
  check_ln(s.prompt_tokens, "prompt_tokens");
  check_ln(s.output_tokens, "output_tokens");
  if (s.duration_s) check_ln(*s.duration_s, "duration_s");
  if (s.arrival_rate_per_s && (!std::isfinite(*s.arrival_rate_per_s) || *s.arrival_rate_per_s <= 0.0))
    throw Error(ErrorKind::validation, "generator.arrival_rate_per_s must be > 0");
}

// Fixed sampling recipe so a trace is reproducible from its seed on any
// platform: std::mt19937_64 (its output sequence is pinned by the standard),
// 53-bit uniforms, single-output Box-Muller normals, and inverse-CDF
// exponentials. std:: distributions are avoided because their algorithms are
// implementation-defined.
class WorkloadRng {
 public:
  explicit WorkloadRng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double lognormal(const LogNormal& p) { return std::exp(p.mu + p.sigma * normal()); }

  double exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

inline std::string synthetic_request_id(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "req-%06llu", static_cast<unsigned long long>(index));
  return buf;
}

// Per request, draws happen in this order: task kind, model size, prompt
// tokens, output tokens, then the arrival gap and duration when enabled.
inline std::vector<GptRequest> generate_synthetic(const GeneratorSpec& spec) {
  validate_generator(spec);
  static constexpr TaskKind kKinds[] = {TaskKind::translation, TaskKind::summarization, TaskKind::qa, TaskKind::chat};
  WorkloadRng rng(spec.seed);
  auto tokens = [&rng](const LogNormal& p) {
    const double raw = std::llround(rng.lognormal(p));
    return static_cast<std::int64_t>(std::clamp<double>(raw, kMinTokens, kMaxTokens));
  };

  std::vector<GptRequest> out;
  out.reserve(spec.request_count);
  double clock = 0.0;
  for (std::uint64_t i = 1; i <= spec.request_count; ++i) {
    GptRequest r;
    r.id = synthetic_request_id(i);
    r.task_kind = kKinds[std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * 4.0), 3)];

    const double pick = rng.uniform();
    double cumulative = 0.0;
    r.model_params_b = spec.model_size_choices_b.back().params_b;
    for (const auto& c : spec.model_size_choices_b) {
      cumulative += c.probability;
      if (pick < cumulative) {
        r.model_params_b = c.params_b;
        break;
      }
    }

    r.prompt_tokens = tokens(spec.prompt_tokens);
    r.output_tokens = tokens(spec.output_tokens);
    if (spec.arrival_rate_per_s) {
      clock += rng.exponential(*spec.arrival_rate_per_s);
      r.arrival_time = clock;
    }
    if (spec.duration_s) r.service_duration = rng.lognormal(*spec.duration_s);
    out.push_back(std::move(r));
  }
  return out;
}

inline Json generator_to_json(const GeneratorSpec& s) {
  Json sizes = Json::array();
  for (const auto& c : s.model_size_choices_b) sizes.push_back({{"params_b", c.params_b}, {"probability", c.probability}});
  Json j{{"request_count", s.request_count},
         {"seed", s.seed},
         {"model_sizes", sizes},
         {"prompt_tokens", {{"mu", s.prompt_tokens.mu}, {"sigma", s.prompt_tokens.sigma}}},
         {"output_tokens", {{"mu", s.output_tokens.mu}, {"sigma", s.output_tokens.sigma}}}};
  if (s.arrival_rate_per_s) j["arrival_rate_per_s"] = *s.arrival_rate_per_s;
  if (s.duration_s) j["duration_s"] = {{"mu", s.duration_s->mu}, {"sigma", s.duration_s->sigma}};
  return j;
}

inline GeneratorSpec generator_from_json(const Json& j) {
  const std::string at = "generator.";
  if (!j.is_object()) throw Error(ErrorKind::validation, "field 'generator' must be an object");
  detail::reject_unknown_keys(
      j, {"request_count", "seed", "model_sizes", "prompt_tokens", "output_tokens", "arrival_rate_per_s", "duration_s"},
      at);
  GeneratorSpec s;
  const std::int64_t count = detail::get_integer(j, "request_count", at, 1000);
  if (count <= 0) throw Error(ErrorKind::validation, "generator.request_count must be > 0");
  s.request_count = static_cast<std::uint64_t>(count);
  if (const Json* seed = detail::member(j, "seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0))
      throw Error(ErrorKind::validation, "generator.seed must be an unsigned integer");
    s.seed = seed->get<std::uint64_t>();
  }
  if (const Json* sizes = detail::member(j, "model_sizes")) {
    if (!sizes->is_array()) throw Error(ErrorKind::validation, "generator.model_sizes must be an array");
    s.model_size_choices_b.clear();
    for (const auto& c : *sizes) {
      const std::string where = at + "model_sizes[].";
      if (!c.is_object()) throw Error(ErrorKind::validation, "generator.model_sizes entries must be objects");
      detail::reject_unknown_keys(c, {"params_b", "probability"}, where);
      s.model_size_choices_b.push_back(
          {detail::get_number(c, "params_b", where, std::nullopt), detail::get_number(c, "probability", where, std::nullopt)});
    }
  }
  auto lognormal = [&](const char* key, LogNormal fallback) {
    const Json* v = detail::member(j, key);
    if (!v) return fallback;
    const std::string where = at + key + ".";
    if (!v->is_object()) throw Error(ErrorKind::validation, "field '" + at + key + "' must be an object");
    detail::reject_unknown_keys(*v, {"mu", "sigma"}, where);
    return LogNormal{detail::get_number(*v, "mu", where, std::nullopt),
                     detail::get_number(*v, "sigma", where, std::nullopt)};
  };
  s.prompt_tokens = lognormal("prompt_tokens", s.prompt_tokens);
  s.output_tokens = lognormal("output_tokens", s.output_tokens);
  if (detail::member(j, "arrival_rate_per_s"))
    s.arrival_rate_per_s = detail::get_number(j, "arrival_rate_per_s", at, std::nullopt);
  if (detail::member(j, "duration_s")) s.duration_s = lognormal("duration_s", {});
  validate_generator(s);
  return s;
}

// ---------------------------------------------------------------------------
// Cluster / experiment configuration
// ---------------------------------------------------------------------------

// Pseudo-request holding a node's pre-existing load from the config.
inline constexpr const char* kBackgroundRequestId = "#background";

struct ClusterConfig {
  Cluster nodes;
  std::map<std::string, NodeTemplate> templates;
  SchedulerConfig scheduler;  // carries threshold, autoscale template, power policy, profiler
  AdaptorPolicy adaptor;
  std::optional<GeneratorSpec> generator;

  ProfilerCoefficients& profiler() { return scheduler.profiler; }
  PowerPolicy& power() { return scheduler.power_policy; }
};

inline NodeTemplate template_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "field '" + where + "' must be an object");
  detail::reject_unknown_keys(j, {"capacity", "p_idle_w", "p_max_w"}, where + ".");
  NodeTemplate t;
  t.capacity = demand_from_json(detail::get_object(j, "capacity", where + "."), where + ".capacity");
  t.p_idle = detail::get_number(j, "p_idle_w", where + ".", 0.0);
  t.p_max = detail::get_number(j, "p_max_w", where + ".", t.p_idle);
  if (t.capacity.compute <= 0.0 || t.capacity.memory <= 0.0 || t.capacity.storage <= 0.0)
    throw Error(ErrorKind::validation, "field '" + where + ".capacity' components must be > 0");
  if (t.p_idle < 0.0) throw Error(ErrorKind::validation, "field '" + where + ".p_idle_w' must be >= 0");
  if (t.p_max < t.p_idle) throw Error(ErrorKind::validation, "field '" + where + ".p_max_w' must be >= p_idle_w");
  return t;
}

inline Json template_to_json(const NodeTemplate& t) {
  return Json{{"capacity", demand_to_json(t.capacity)}, {"p_idle_w", t.p_idle}, {"p_max_w", t.p_max}};
}

// Schema (every section but node_templates/nodes is optional):
//   node_templates: {name: {capacity: {compute, memory_gib, storage_gib}, p_idle_w, p_max_w}}
//   nodes:     [{template, count?, id?, background?: {compute, memory, storage}}]
//   autoscale: {enabled = false, template = first node entry's template}
//   scheduler: {threshold = 0.8, resort_after_each_allocation = false}
//   power:     {mode = "incremental" | "absolute-after", off_when_empty = true}
//   profiler:  {flops_per_param_token, weight_mem_gib_per_b, kv_mem_gib_per_ktoken_per_b, storage_gib_per_b}
//   adaptor:   {scale_down_grace_s = 60, retain_min_nodes = 0}
//   generator: see generator_from_json
inline ClusterConfig cluster_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "config must be a JSON object");
  detail::reject_unknown_keys(
      j, {"node_templates", "nodes", "autoscale", "scheduler", "power", "profiler", "adaptor", "generator"}, "");
  ClusterConfig cfg;

  const Json& templates = detail::get_object(j, "node_templates", "");
  for (const auto& [name, body] : templates.items()) {
    cfg.templates.emplace(name, template_from_json(body, "node_templates." + name));
  }
  if (cfg.templates.empty()) throw Error(ErrorKind::validation, "field 'node_templates' must define a template");
  auto lookup = [&](const std::string& name, const std::string& where) {
    auto it = cfg.templates.find(name);
    if (it == cfg.templates.end()) throw Error(ErrorKind::validation, "field '" + where + "' names unknown template '" + name + "'");
    return it->second;
  };

  std::optional<std::string> first_template;
  std::set<std::string> node_ids;
  if (const Json* nodes = detail::member(j, "nodes")) {
    if (!nodes->is_array()) throw Error(ErrorKind::validation, "field 'nodes' must be an array");
    for (std::size_t i = 0; i < nodes->size(); ++i) {
      const Json& entry = (*nodes)[i];
      const std::string where = "nodes[" + std::to_string(i) + "].";
      if (!entry.is_object()) throw Error(ErrorKind::validation, "field 'nodes[" + std::to_string(i) + "]' must be an object");
      detail::reject_unknown_keys(entry, {"template", "count", "id", "background"}, where);
      const std::string tname = detail::get_string(entry, "template", where, std::nullopt);
      const NodeTemplate tmpl = lookup(tname, where + "template");
      if (!first_template) first_template = tname;
      const std::int64_t count = detail::get_integer(entry, "count", where, 1);
      if (count < 1) throw Error(ErrorKind::validation, "field '" + where + "count' must be >= 1");
      const Json* explicit_id = detail::member(entry, "id");
      if (explicit_id && count != 1)
        throw Error(ErrorKind::validation, "field '" + where + "id' requires count = 1");
      std::optional<UtilizationVector> background;
      if (const Json* bg = detail::member(entry, "background")) {
        const std::string bw = where + "background.";
        if (!bg->is_object()) throw Error(ErrorKind::validation, "field '" + where + "background' must be an object");
        detail::reject_unknown_keys(*bg, {"compute", "memory", "storage"}, bw);
        UtilizationVector u{detail::get_number(*bg, "compute", bw, 0.0), detail::get_number(*bg, "memory", bw, 0.0),
                            detail::get_number(*bg, "storage", bw, 0.0)};
        for (double v : {u.compute, u.memory, u.storage}) {
          if (v < 0.0 || v > 1.0) throw Error(ErrorKind::validation, "field '" + where + "background' fractions must be in [0, 1]");
        }
        background = u;
      }
      for (std::int64_t c = 0; c < count; ++c) {
        std::string id = explicit_id ? detail::get_string(entry, "id", where, std::nullopt)
                                     : "node-" + std::to_string(cfg.nodes.size() + 1);
        if (!node_ids.insert(id).second) throw Error(ErrorKind::validation, "duplicate node id '" + id + "'");
        Node node = make_node(std::move(id), tmpl);
        if (background) node.allocate(kBackgroundRequestId, *background);
        cfg.nodes.push_back(std::move(node));
      }
    }
  }

  if (const Json* a = detail::member(j, "autoscale")) {
    if (!a->is_object()) throw Error(ErrorKind::validation, "field 'autoscale' must be an object");
    detail::reject_unknown_keys(*a, {"enabled", "template"}, "autoscale.");
    if (detail::get_bool(*a, "enabled", "autoscale.", false)) {
      std::optional<std::string> fallback = first_template;
      if (!fallback && cfg.templates.size() == 1) fallback = cfg.templates.begin()->first;
      if (!detail::member(*a, "template") && !fallback)
        throw Error(ErrorKind::validation, "field 'autoscale.template' is required");
      const std::string tname = detail::get_string(*a, "template", "autoscale.", fallback);
      cfg.scheduler.autoscale_template = lookup(tname, "autoscale.template");
    }
  }

  if (const Json* s = detail::member(j, "scheduler")) {
    if (!s->is_object()) throw Error(ErrorKind::validation, "field 'scheduler' must be an object");
    detail::reject_unknown_keys(*s, {"threshold", "resort_after_each_allocation"}, "scheduler.");
    const double thr = detail::get_number(*s, "threshold", "scheduler.", 0.8);
    if (!(thr > 0.0 && thr <= 1.0))
      throw Error(ErrorKind::validation, "field 'scheduler.threshold' must be in (0, 1], got " + format_number(thr));
    cfg.scheduler.threshold = Threshold(thr);
    cfg.scheduler.resort_after_each_allocation =
        detail::get_bool(*s, "resort_after_each_allocation", "scheduler.", false);
  }

  if (const Json* p = detail::member(j, "power")) {
    if (!p->is_object()) throw Error(ErrorKind::validation, "field 'power' must be an object");
    detail::reject_unknown_keys(*p, {"mode", "off_when_empty"}, "power.");
    const std::string mode = detail::get_string(*p, "mode", "power.", std::string("incremental"));
    if (mode == "incremental") {
      cfg.power().mode = PowerMode::incremental;
    } else if (mode == "absolute-after") {
      cfg.power().mode = PowerMode::absolute_after;
    } else {
      throw Error(ErrorKind::validation, "field 'power.mode' must be incremental|absolute-after");
    }
    cfg.power().off_when_empty = detail::get_bool(*p, "off_when_empty", "power.", true);
  }

  if (const Json* p = detail::member(j, "profiler")) {
    if (!p->is_object()) throw Error(ErrorKind::validation, "field 'profiler' must be an object");
    detail::reject_unknown_keys(
        *p, {"flops_per_param_token", "weight_mem_gib_per_b", "kv_mem_gib_per_ktoken_per_b", "storage_gib_per_b"},
        "profiler.");
    ProfilerCoefficients& c = cfg.profiler();
    c.flops_per_param_token = detail::get_number(*p, "flops_per_param_token", "profiler.", c.flops_per_param_token);
    c.weight_mem_gib_per_b = detail::get_number(*p, "weight_mem_gib_per_b", "profiler.", c.weight_mem_gib_per_b);
    c.kv_mem_gib_per_ktoken_per_b =
        detail::get_number(*p, "kv_mem_gib_per_ktoken_per_b", "profiler.", c.kv_mem_gib_per_ktoken_per_b);
    c.storage_gib_per_b = detail::get_number(*p, "storage_gib_per_b", "profiler.", c.storage_gib_per_b);
    validate_coefficients(c);
  }

  if (const Json* a = detail::member(j, "adaptor")) {
    if (!a->is_object()) throw Error(ErrorKind::validation, "field 'adaptor' must be an object");
    detail::reject_unknown_keys(*a, {"scale_down_grace_s", "retain_min_nodes"}, "adaptor.");
    cfg.adaptor.scale_down_grace_s = detail::get_number(*a, "scale_down_grace_s", "adaptor.", 60.0);
    if (cfg.adaptor.scale_down_grace_s < 0.0)
      throw Error(ErrorKind::validation, "field 'adaptor.scale_down_grace_s' must be >= 0");
    const std::int64_t retain = detail::get_integer(*a, "retain_min_nodes", "adaptor.", 0);
    if (retain < 0) throw Error(ErrorKind::validation, "field 'adaptor.retain_min_nodes' must be >= 0");
    cfg.adaptor.retain_min_nodes = static_cast<std::uint64_t>(retain);
  }

  if (const Json* g = detail::member(j, "generator")) cfg.generator = generator_from_json(*g);
  return cfg;
}

inline ClusterConfig load_cluster_config(std::istream& in) {
  return cluster_config_from_json(detail::parse_json(in, "config"));
}

inline ClusterConfig load_cluster_config_file(const std::string& path) {
  auto in = detail::open_input(path);
  try {
    return load_cluster_config(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

// The configuration shipped as configs/default.json.
inline Json default_cluster_config_json() {
  return Json::parse(R"({
  "node_templates": {
    "gpu-node": {
      "capacity": {"compute": 1000.0, "memory_gib": 640.0, "storage_gib": 4000.0},
      "p_idle_w": 200.0,
      "p_max_w": 500.0
    }
  },
  "nodes": [
    {"id": "node-1", "template": "gpu-node", "background": {"compute": 0.6, "memory": 0.5, "storage": 0.3}},
    {"id": "node-2", "template": "gpu-node", "background": {"compute": 0.45, "memory": 0.4, "storage": 0.2}},
    {"id": "node-3", "template": "gpu-node", "background": {"compute": 0.3, "memory": 0.25, "storage": 0.1}},
    {"id": "node-4", "template": "gpu-node", "background": {"compute": 0.15, "memory": 0.1, "storage": 0.05}},
    {"template": "gpu-node", "count": 60}
  ],
  "autoscale": {"enabled": true, "template": "gpu-node"},
  "scheduler": {"threshold": 0.8, "resort_after_each_allocation": false},
  "power": {"mode": "incremental", "off_when_empty": true},
  "profiler": {
    "flops_per_param_token": 0.002,
    "weight_mem_gib_per_b": 2.0,
    "kv_mem_gib_per_ktoken_per_b": 0.02,
    "storage_gib_per_b": 2.0
  },
  "adaptor": {"scale_down_grace_s": 60.0, "retain_min_nodes": 0}
})");
}

inline ClusterConfig default_cluster_config() { return cluster_config_from_json(default_cluster_config_json()); }

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json utilization_to_json(const UtilizationVector& u) {
  return Json{{"compute", canonical_number(u.compute)},
              {"memory", canonical_number(u.memory)},
              {"storage", canonical_number(u.storage)}};
}

inline Json report_to_json(const Report& r) {
  Json j;
  j["mean_compute_utilization"] = canonical_number(r.mean_compute_utilization);
  j["utilization_stddev"] = canonical_number(r.utilization_stddev);
  j["total_power_w"] = canonical_number(r.total_power_w);
  j["node_count"] = r.node_count;
  j["created_node_count"] = r.created_node_count;
  j["request_count"] = r.request_count;
  j["unallocated_count"] = r.unallocated_count;
  j["per_resource_mean_utilization"] = utilization_to_json(r.per_resource_mean_utilization);
  if (r.deadline_misses) j["deadline_misses"] = *r.deadline_misses;
  if (r.energy_wh) j["energy_wh"] = canonical_number(*r.energy_wh);
  if (r.duration_s) j["duration_s"] = canonical_number(*r.duration_s);
  return j;
}

inline Report report_from_json(const Json& j) {
  const std::string at = "report.";
  Report r;
  r.mean_compute_utilization = detail::get_number(j, "mean_compute_utilization", at, std::nullopt);
  r.utilization_stddev = detail::get_number(j, "utilization_stddev", at, std::nullopt);
  r.total_power_w = detail::get_number(j, "total_power_w", at, std::nullopt);
  r.node_count = static_cast<std::uint64_t>(detail::get_integer(j, "node_count", at, std::nullopt));
  r.created_node_count = static_cast<std::uint64_t>(detail::get_integer(j, "created_node_count", at, std::nullopt));
  r.request_count = static_cast<std::uint64_t>(detail::get_integer(j, "request_count", at, std::nullopt));
  r.unallocated_count = static_cast<std::uint64_t>(detail::get_integer(j, "unallocated_count", at, std::nullopt));
  const Json& u = detail::get_object(j, "per_resource_mean_utilization", at);
  r.per_resource_mean_utilization = {detail::get_number(u, "compute", at, std::nullopt),
                                     detail::get_number(u, "memory", at, std::nullopt),
                                     detail::get_number(u, "storage", at, std::nullopt)};
  if (detail::member(j, "deadline_misses"))
    r.deadline_misses = static_cast<std::uint64_t>(detail::get_integer(j, "deadline_misses", at, std::nullopt));
  if (detail::member(j, "energy_wh")) r.energy_wh = detail::get_number(j, "energy_wh", at, std::nullopt);
  if (detail::member(j, "duration_s")) r.duration_s = detail::get_number(j, "duration_s", at, std::nullopt);
  return r;
}

inline Json outcome_to_json(const AllocationOutcome& o) {
  Json allocation = Json::object();
  for (const auto& [req, node] : o.allocation) allocation[req] = node;
  Json trace = Json::array();
  for (const auto& d : o.trace) {
    Json rec;
    rec["request_id"] = d.request_id;
    rec["demand"] = Json{{"compute", canonical_number(d.demand.compute)},
                         {"memory_gib", canonical_number(d.demand.memory)},
                         {"storage_gib", canonical_number(d.demand.storage)}};
    rec["node_id"] = d.node_id ? Json(*d.node_id) : Json(nullptr);
    rec["reason"] = std::string(to_string(d.reason));
    if (!d.scanned.empty()) {
      Json scanned = Json::array();
      for (const auto& s : d.scanned) {
        Json e{{"node_id", s.node_id}, {"feasible", s.feasible}};
        if (s.power_delta_w) e["power_delta_w"] = canonical_number(*s.power_delta_w);
        scanned.push_back(std::move(e));
      }
      rec["scanned"] = std::move(scanned);
    }
    trace.push_back(std::move(rec));
  }
  return Json{{"allocation", allocation},
              {"unallocated", o.unallocated},
              {"created_node_ids", o.created_node_ids},
              {"trace", trace}};
}

// Canonical form of a cluster: node order as given, allocations by id.
inline Json cluster_to_json(std::span<const Node> nodes) {
  Json arr = Json::array();
  for (const auto& n : nodes) {
    Json allocated = Json::object();
    for (const auto& [rid, pct] : n.allocated) allocated[rid] = utilization_to_json(pct);
    arr.push_back(Json{{"id", n.id},
                       {"template", template_to_json(n.spec)},
                       {"utilization", utilization_to_json(n.utilization)},
                       {"allocated", allocated}});
  }
  return arr;
}

enum class ReportFormat { json, csv };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw Error(ErrorKind::config, "unknown format '" + std::string(s) + "' (expected json|csv)");
}

inline void write_json(std::ostream& out, const Json& j) {
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing JSON output");
}

inline constexpr const char* kReportCsvHeader =
    "mean_compute_utilization,utilization_stddev,total_power_w,node_count,created_node_count,request_count,"
    "unallocated_count,compute_mean_util,memory_mean_util,storage_mean_util,deadline_misses,energy_wh,duration_s";

inline void write_report(std::ostream& out, const Report& r, ReportFormat format) {
  if (format == ReportFormat::json) {
    write_json(out, report_to_json(r));
    return;
  }
  const auto& u = r.per_resource_mean_utilization;
  out << kReportCsvHeader << '\n'
      << format_number(r.mean_compute_utilization) << ',' << format_number(r.utilization_stddev) << ','
      << format_number(r.total_power_w) << ',' << r.node_count << ',' << r.created_node_count << ','
      << r.request_count << ',' << r.unallocated_count << ',' << format_number(u.compute) << ','
      << format_number(u.memory) << ',' << format_number(u.storage) << ',';
  if (r.deadline_misses) out << *r.deadline_misses;
  out << ',';
  if (r.energy_wh) out << format_number(*r.energy_wh);
  out << ',';
  if (r.duration_s) out << format_number(*r.duration_s);
  out << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing report");
}

inline constexpr const char* kSnapshotCsvHeader = "time_s,node_id,compute_util,memory_util,storage_util,power_w";

inline void write_snapshots(std::ostream& out, std::span<const SnapshotRow> rows, ReportFormat format) {
  if (format == ReportFormat::json) {
    Json arr = Json::array();
    for (const auto& r : rows) {
      arr.push_back(Json{{"time_s", canonical_number(r.time_s)},
                         {"node_id", r.node_id},
                         {"compute_util", canonical_number(r.utilization.compute)},
                         {"memory_util", canonical_number(r.utilization.memory)},
                         {"storage_util", canonical_number(r.utilization.storage)},
                         {"power_w", canonical_number(r.power_w)}});
    }
    write_json(out, arr);
    return;
  }
  out << kSnapshotCsvHeader << '\n';
  for (const auto& r : rows) {
    out << format_number(r.time_s) << ',' << r.node_id << ',' << format_number(r.utilization.compute) << ','
        << format_number(r.utilization.memory) << ',' << format_number(r.utilization.storage) << ','
        << format_number(r.power_w) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing snapshots");
}

struct ComparisonRow {
  Algorithm algorithm;
  Report report;
};

inline constexpr const char* kComparisonCsvHeader =
    "algorithm,mean_util,util_stddev,total_power_w,node_count,unallocated_count";

inline void write_comparison(std::ostream& out, std::span<const ComparisonRow> rows, ReportFormat format) {
  if (format == ReportFormat::json) {
    Json arr = Json::array();
    for (const auto& row : rows) {
      arr.push_back(Json{{"algorithm", std::string(to_string(row.algorithm))},
                         {"mean_util", canonical_number(row.report.mean_compute_utilization)},
                         {"util_stddev", canonical_number(row.report.utilization_stddev)},
                         {"total_power_w", canonical_number(row.report.total_power_w)},
                         {"node_count", row.report.node_count},
                         {"unallocated_count", row.report.unallocated_count}});
    }
    write_json(out, arr);
    return;
  }
  out << kComparisonCsvHeader << '\n';
  for (const auto& row : rows) {
    out << to_string(row.algorithm) << ',' << format_number(row.report.mean_compute_utilization) << ','
        << format_number(row.report.utilization_stddev) << ',' << format_number(row.report.total_power_w) << ','
        << row.report.node_count << ',' << row.report.unallocated_count << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing comparison");
}

}  // namespace gptsched
