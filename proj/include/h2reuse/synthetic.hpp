#pragma once

#include <random>
#include <string>

#include "h2reuse/timeline.hpp"

namespace h2reuse::synthetic {

// Knobs for randomized page generation. Pages draw domains, endpoints
// and certificates from small pools so that reuse collisions (shared
// endpoints, covering certificates) actually occur.
struct Options {
  size_t max_connections = 8;
  bool with_credentials = false;  // emit included/omitted hints
  bool with_421 = false;          // sprinkle misdirected-request exclusions
};

// One random page with ENDLESS closes; derive other models with
// `with_model`. Deterministic for a given rng state.
SessionTimeline make_page(std::mt19937& rng, const Options& options,
                          const std::string& page_url);

// Re-derives close times from the requests under the given model.
SessionTimeline with_model(const SessionTimeline& page, DurationModel model);

// Renders the page as a HAR 1.2 document the ingester accepts.
std::string to_har(const SessionTimeline& page);

}  // namespace h2reuse::synthetic
