#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "h2reuse/model.hpp"

namespace h2reuse {

// How connection close times are determined. HAR traces only carry
// request-level timing, so lifetimes are modeled as either never
// closing (ENDLESS) or closing right after the last request
// (IMMEDIATE). Event-log traces carry MEASURED lifetimes.
enum class DurationModel { ENDLESS, IMMEDIATE, MEASURED };

const char* duration_model_name(DurationModel m);
std::optional<DurationModel> duration_model_from_name(std::string_view name);

// Per-reason drop tallies. Units differ by reason: most count dropped
// requests, inconsistent_ip counts dropped sockets, and the *_file
// reasons count whole input files.
struct FilterStats {
  size_t socket_id_zero = 0;
  size_t missing_ip = 0;
  size_t inconsistent_ip = 0;
  size_t invalid_method = 0;
  size_t invalid_version = 0;
  size_t invalid_status = 0;
  size_t bad_page_ref = 0;
  size_t missing_certificate = 0;
  size_t non_h2_protocol = 0;
  size_t missing_request_id = 0;
  size_t invalid_url = 0;  // host not representable; checked last, outside the canonical set
  size_t invalid_certificate_file = 0;

  size_t total() const {
    return socket_id_zero + missing_ip + inconsistent_ip + invalid_url + invalid_method +
           invalid_version + invalid_status + bad_page_ref + missing_certificate +
           non_h2_protocol + missing_request_id + invalid_certificate_file;
  }

  FilterStats& operator+=(const FilterStats& other);
};

// Non-fatal oddities observed while ingesting; never cause drops.
struct IngestWarnings {
  size_t cert_conflicts = 0;    // later requests on a socket carried a different cert
  size_t ip_sans_ignored = 0;   // IP-address SAN entries skipped
  size_t bad_sans_ignored = 0;  // malformed SAN entries skipped
  size_t unknown_codes = 0;     // event codes missing from the constants map
  size_t truncated_tail = 0;    // event array salvaged from a cut-off log
  size_t unbound_requests = 0;  // requests with no resolvable session
  size_t dropped_sessions = 0;  // sessions lacking a socket or certificate

  IngestWarnings& operator+=(const IngestWarnings& other);
};

// Measured-lifetime statistics; only meaningful for event-log input.
struct LifetimeStats {
  size_t total_sessions = 0;
  size_t closed_sessions = 0;  // closed before capture end
  double median_closed_lifetime_ms = 0;

  double closed_fraction() const {
    return total_sessions == 0 ? 0.0
                               : static_cast<double>(closed_sessions) /
                                     static_cast<double>(total_sessions);
  }
};

// One page's reconstructed HTTP/2 connections, ordered by
// (open time, conn id).
struct SessionTimeline {
  std::string page_url;
  DurationModel model = DurationModel::ENDLESS;
  std::vector<ConnectionSession> sessions;
  FilterStats filters;
  IngestWarnings warnings;
  std::optional<LifetimeStats> lifetimes;  // MEASURED timelines only
};

}  // namespace h2reuse
