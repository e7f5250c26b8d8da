#pragma once

#include <cmath>

#include "gptsched/core_model.hpp"

namespace gptsched {

// Linear synthetic demand model. The defaults are illustrative, not
// calibrated against any hardware.
struct ProfilerCoefficients {
  double flops_per_param_token = 0.002;       // compute units per (B params x token)
  double weight_mem_gib_per_b = 2.0;          // GiB per B params
  double kv_mem_gib_per_ktoken_per_b = 0.02;  // GiB per (B params x 1000 tokens)
  double storage_gib_per_b = 2.0;             // GiB per B params

  friend bool operator==(const ProfilerCoefficients&, const ProfilerCoefficients&) = default;
};

inline void validate_coefficients(const ProfilerCoefficients& c) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(c.flops_per_param_token) || c.flops_per_param_token <= 0.0)
    throw Error(ErrorKind::validation, "profiler.flops_per_param_token must be > 0");
  if (!finite(c.weight_mem_gib_per_b) || c.weight_mem_gib_per_b <= 0.0)
    throw Error(ErrorKind::validation, "profiler.weight_mem_gib_per_b must be > 0");
  if (!finite(c.kv_mem_gib_per_ktoken_per_b) || c.kv_mem_gib_per_ktoken_per_b < 0.0)
    throw Error(ErrorKind::validation, "profiler.kv_mem_gib_per_ktoken_per_b must be >= 0");
  if (!finite(c.storage_gib_per_b) || c.storage_gib_per_b <= 0.0)
    throw Error(ErrorKind::validation, "profiler.storage_gib_per_b must be > 0");
}

// An explicit demand always wins; otherwise compute scales with
// params x tokens, memory is weights plus a per-token KV term, and storage is
// the checkpoint footprint. task_kind is not consulted.
inline ResourceVector estimate_demand(const GptRequest& request, const ProfilerCoefficients& coeffs) {
  if (request.explicit_demand) return *request.explicit_demand;
  if (!(request.model_params_b > 0.0))
    throw Error(ErrorKind::unprofilable_request,
                "request '" + request.id + "' has neither an explicit demand nor a model size");
  const double params = request.model_params_b;
  const double tokens = static_cast<double>(request.prompt_tokens + request.output_tokens);
  return {
      coeffs.flops_per_param_token * params * tokens,
      coeffs.weight_mem_gib_per_b * params + coeffs.kv_mem_gib_per_ktoken_per_b * params * tokens / 1000.0,
      coeffs.storage_gib_per_b * params,
  };
}

}  // namespace gptsched
