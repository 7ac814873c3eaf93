#pragma once

#include <string>
#include <vector>

#include "flsa/types.hpp"

namespace flsa {

// One breakpoint of the regularization path: seg is the solution for every
// lambda in [lambda, next breakpoint).
struct PathEvent {
  double lambda = 0.0;
  Segmentation seg;
};

// Breakpoints in strictly increasing lambda. The first event sits at
// lambda = 0 (the data itself) and the last at lambda_max (one segment).
struct LambdaPath {
  std::vector<PathEvent> events;
};

struct NestingReport {
  bool ok = true;
  int event_index = -1;  // first offending event pair (index of the later event)
  int position = -1;     // offending change point, when applicable
  std::string reason;
};

// Full fusion path by event-driven segment merging: as lambda grows, change
// points only disappear, surviving jump signs are frozen, and between events
// the levels are affine in lambda, which gives each adjacent pair a closed
// form fusion lambda. Simultaneous fusions are handled inside one event in
// position order.
LambdaPath trace_path(const Signal& y);

// Checks that consecutive events are nested (change points only drop out as
// lambda increases) and that surviving jump signs never flip. A failure here
// indicates a solver bug, not a data property.
NestingReport validate_nesting(const LambdaPath& path);

}  // namespace flsa
