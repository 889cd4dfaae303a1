#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "h2reuse/model.hpp"

namespace h2reuse {

struct ResolverSpec {
  IpAddress address;
  std::string label;  // operator / country
};

// Loads a `ip<TAB>label` resolver list. Duplicate addresses and
// malformed lines raise LoadError with the line number.
std::vector<ResolverSpec> load_resolver_list(const std::string& path);
std::vector<ResolverSpec> parse_resolver_list(std::string_view content,
                                              const std::string& source = "<resolvers>");

// One domain per line; '#' comments allowed.
std::vector<DnsName> load_domain_list(const std::string& path);
std::vector<DnsName> parse_domain_list(std::string_view content,
                                       const std::string& source = "<domains>");

using AnswerSet = std::set<IpAddress>;

// A failed lookup is data, not an error: the cell stays empty.
using Cell = std::optional<AnswerSet>;

struct ProbePlan {
  std::vector<ResolverSpec> resolvers;
  std::vector<DnsName> domains;
};

// Answers of one probe round: cells[resolver][domain].
struct ResolutionSnapshot {
  int64_t timeslot_unix_ms = 0;
  std::vector<std::vector<Cell>> cells;

  bool complete() const {
    for (const auto& row : cells)
      for (const Cell& cell : row)
        if (!cell) return false;
    return true;
  }
};

// Injectable lookup: live wire queries in production, scripts in tests.
// Returns nullopt on timeout or failure.
using DnsClient =
    std::function<Cell(const ResolverSpec& resolver, const DnsName& domain)>;

// Runs one round: every (resolver, domain) cell is filled or FAILED.
// Queries run concurrently; the round completes as a unit.
ResolutionSnapshot probe_round(const ProbePlan& plan, const DnsClient& client,
                               int64_t timeslot_unix_ms);

struct OverlapSeries {
  DnsName domain_a;
  DnsName domain_b;
  // (timeslot, number of resolvers whose answers for a and b intersect)
  std::vector<std::pair<int64_t, int>> points;
  size_t skipped_slots = 0;  // slots where some resolver failed some domain
};

// Per-slot overlap count for one domain pair. Slots where any resolver
// failed to answer any probed domain are skipped (and tallied), so the
// series is free of missing-data noise. Throws on unknown domains.
OverlapSeries overlap_series(const ProbePlan& plan,
                             const std::vector<ResolutionSnapshot>& snapshots,
                             const DnsName& domain_a, const DnsName& domain_b);

// Live UDP client with TCP fallback on truncation. Optionally sends a
// zero-scope client-subnet option and records resolvers that echo it.
class WireDnsClient {
 public:
  explicit WireDnsClient(std::chrono::milliseconds timeout = std::chrono::milliseconds(3000),
                         bool ecs_probe = false);

  Cell operator()(const ResolverSpec& resolver, const DnsName& domain) const;

  // Resolver addresses that echoed the client-subnet option.
  const std::set<std::string>& ecs_seen() const { return ecs_seen_; }

 private:
  std::chrono::milliseconds timeout_;
  bool ecs_probe_;
  mutable std::set<std::string> ecs_seen_;
};

// Scripted client replaying a fixture document of the form
//   {"slots": [{"answers": {"<resolver ip>": {"<domain>": ["1.2.3.4"] | "FAILED"}}}]}
// Cells absent from the script count as FAILED.
class ScriptedDnsClient {
 public:
  static ScriptedDnsClient load_file(const std::string& path);
  static ScriptedDnsClient parse(std::string_view content);

  size_t slot_count() const { return slots_.size(); }
  void set_slot(size_t slot) { slot_ = slot; }

  Cell operator()(const ResolverSpec& resolver, const DnsName& domain) const;

 private:
  using SlotMap = std::map<std::string, std::map<std::string, Cell>>;
  std::vector<SlotMap> slots_;
  size_t slot_ = 0;
};

// Serialization used by the CLI: snapshots persist incrementally as
// JSON lines; overlap series render as CSV.
std::string snapshot_to_json_line(const ProbePlan& plan, const ResolutionSnapshot& snapshot);
ResolutionSnapshot snapshot_from_json_line(const ProbePlan& plan, std::string_view line);
std::string overlap_csv(const OverlapSeries& series);

}  // namespace h2reuse
