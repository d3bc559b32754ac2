#pragma once

// Adaptive guaranteed-performance consensus toolkit: umbrella header.

#include "agpc/core.hpp"
#include "agpc/graph.hpp"
#include "agpc/metrics.hpp"
#include "agpc/performance.hpp"
#include "agpc/protocol.hpp"
#include "agpc/riccati.hpp"
#include "agpc/scenario.hpp"
#include "agpc/simulate.hpp"
#include "agpc/trace_io.hpp"
