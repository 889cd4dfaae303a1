#pragma once

#include <map>
#include <string>
#include <vector>

#include "h2reuse/model.hpp"
#include "h2reuse/timeline.hpp"

namespace h2reuse {

// Reuse policy of the idealized client pool. The SAN and endpoint
// requirements are inherent to the protocol and always hold; they are
// carried only so audit output can state them.
struct PoolPolicy {
  bool credentials_partitioning = true;
  bool reuse_requires_san = true;
  bool reuse_requires_endpoint = true;
};

struct SimResult {
  size_t observed = 0;
  size_t opened = 0;
  // observed − opened; never negative.
  size_t saved() const { return observed - opened; }
  // observed conn id → simulated connection id ("p0", "p1", ...)
  std::map<ConnId, std::string> mapping;
};

// Replays the page's observed connections, in open order, through an
// ideal pool: a connection is merged onto an existing simulated one
// whenever reuse would have been possible, and opened otherwise.
// Throws ConfigError if the always-true policy flags are cleared.
SimResult simulate_pool(const SessionTimeline& timeline, const PoolPolicy& policy);

}  // namespace h2reuse
