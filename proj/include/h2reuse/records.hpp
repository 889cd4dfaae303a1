#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "h2reuse/classify.hpp"
#include "h2reuse/poolsim.hpp"
#include "h2reuse/timeline.hpp"

namespace h2reuse {

// Everything the corpus-level tables need about one attributed cause.
struct CauseAttribution {
  std::vector<ConnId> witnesses;
  Origin prev_origin;  // initial origin of the earliest witness
};

// Flattened per-connection result: one line of the findings file.
// Non-redundant connections appear with an empty cause map.
struct ConnRecord {
  ConnId conn_id;
  Endpoint endpoint;
  Origin origin;          // the connection's initial origin
  std::string issuer_org;
  double open_ms = 0;
  double close_ms = kOpenForever;
  size_t request_count = 0;
  CredentialsHint credentials = CredentialsHint::UNKNOWN;
  std::map<Cause, CauseAttribution> causes;
  std::vector<ConnId> dual_role_witnesses;
  std::string sim_conn;  // simulated connection this one maps onto

  bool redundant() const { return !causes.empty(); }
};

struct SimSummary {
  size_t observed = 0;
  size_t opened = 0;
  size_t saved = 0;
};

// One analyzed page: the unit the aggregator consumes and the findings
// file stores.
struct PageAnalysis {
  std::string page_url;
  DurationModel model = DurationModel::ENDLESS;
  FetchMode fetch = FetchMode::FOLLOW_FETCH;
  std::vector<ConnRecord> connections;  // ordered by (open_ms, conn_id)
  SimSummary sim;
  FilterStats filters;
  IngestWarnings warnings;
  size_t port_mismatch_san_matches = 0;
  std::optional<LifetimeStats> lifetimes;
};

// Joins classification and simulation output against the timeline.
PageAnalysis build_page_analysis(const SessionTimeline& timeline, FetchMode mode,
                                 const PageFindings& findings, const SimResult& sim);

struct FindingsMeta {
  std::string tool_version;
  std::string map_version;
  std::string corpus;
  DurationModel model = DurationModel::ENDLESS;
  FetchMode fetch = FetchMode::FOLLOW_FETCH;
};

// Line-delimited findings format: one meta line, then per page one
// page line followed by its connection lines.
std::string serialize_meta(const FindingsMeta& meta);
std::string serialize_page(const PageAnalysis& page);  // page line + conn lines

struct FindingsFile {
  FindingsMeta meta;
  std::vector<PageAnalysis> pages;
};

// Parses a findings file back. Throws ParseError on malformed lines and
// ConfigError when the file carries no meta line.
FindingsFile parse_findings(std::string_view content);
FindingsFile parse_findings_file(const std::string& path);

}  // namespace h2reuse
