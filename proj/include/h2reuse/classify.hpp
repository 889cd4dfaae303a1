#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "h2reuse/model.hpp"
#include "h2reuse/timeline.hpp"

namespace h2reuse {

// Why a (existing connection, target origin) pair can or cannot be reused.
enum class ReuseVerdict {
  REUSABLE,       // endpoint matches and the certificate covers the target
  IP_MISMATCH,    // certificate covers the target but the endpoint differs
  CERT_MISMATCH,  // certificate does not cover the target
  EXCLUDED_421,   // the existing connection saw a 421 for the target host
};

const char* reuse_verdict_name(ReuseVerdict v);

enum class FetchMode { FOLLOW_FETCH, IGNORE_FETCH };

const char* fetch_mode_name(FetchMode m);
std::optional<FetchMode> fetch_mode_from_name(std::string_view name);

// True iff some SAN pattern matches the domain. Literal patterns match
// by equality on normalized names; a wildcard covers exactly one extra
// leftmost label, never the bare base name and never two labels.
bool san_covers(const Certificate& cert, const DnsName& domain);

// Verdict for sending a request for `target` (observed on
// `target_endpoint`, the endpoint of the connection under
// classification) over `existing`.
ReuseVerdict reuse_verdict(const ConnectionSession& existing, const Origin& target,
                           const Endpoint& target_endpoint);

// Per-page side observations that are not part of any Finding.
struct ClassifyDiagnostics {
  // SAN-covering witnesses at the same IP but a different port; counted
  // instead of attributed to IP.
  size_t port_mismatch_san_matches = 0;
};

// Applies the per-witness attribution rules for one subject connection
// against the set of sessions open at its establishment. `prior_open`
// must contain exactly the sessions whose open interval contains
// subject.open_ms and that order strictly before the subject. Returns
// no Finding for unknown third parties.
std::optional<Finding> classify_connection(const ConnectionSession& subject,
                                           const std::vector<const ConnectionSession*>& prior_open,
                                           FetchMode mode,
                                           ClassifyDiagnostics* diag = nullptr);

// Aggregated per-page result of the open-set sweep.
struct PageFindings {
  std::string page_url;
  size_t total_h2_connections = 0;
  std::vector<Finding> findings;
  // Per-cause connection counts: a connection carrying two causes
  // increments both counts once each, so the sum may exceed `redundant`.
  std::map<Cause, size_t> cause_connections;
  size_t redundant = 0;
  ClassifyDiagnostics diagnostics;
};

// Sweeps the timeline's sessions in open order, maintaining the set of
// still-open connections under the timeline's duration model, and
// classifies each connection at its establishment time.
PageFindings analyze_page(const SessionTimeline& timeline, FetchMode mode);

}  // namespace h2reuse
