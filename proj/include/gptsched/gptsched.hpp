#pragma once

#include "gptsched/core_model.hpp"
#include "gptsched/error.hpp"
#include "gptsched/metrics.hpp"
#include "gptsched/power.hpp"
#include "gptsched/profiler.hpp"
#include "gptsched/scheduling.hpp"
#include "gptsched/simulator.hpp"
#include "gptsched/workload_io.hpp"
