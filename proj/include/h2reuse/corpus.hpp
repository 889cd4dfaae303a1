#pragma once

#include <string>
#include <vector>

#include "h2reuse/ingest_har.hpp"
#include "h2reuse/ingest_netlog.hpp"
#include "h2reuse/records.hpp"

namespace h2reuse {

enum class InputKind { HAR, NETLOG };

struct AnalyzeOptions {
  InputKind kind = InputKind::HAR;
  DurationModel model = DurationModel::ENDLESS;  // HAR inputs only
  FetchMode fetch = FetchMode::FOLLOW_FETCH;
  HarOptions har;
  EventNameMap netlog_names = EventNameMap::builtin();
  int workers = 0;  // 0 = library default
};

// Classification + pool replay for one already-ingested page. The pool
// honors credentials partitioning exactly when the classifier follows
// the Fetch behavior.
PageAnalysis analyze_timeline(const SessionTimeline& timeline, FetchMode fetch);

// Ingest + analyze one trace file.
PageAnalysis analyze_file(const std::string& path, const AnalyzeOptions& options);

// Expands files/directories into a sorted list of trace paths.
std::vector<std::string> collect_input_files(const std::vector<std::string>& inputs,
                                             InputKind kind);

// Per-page analysis is independent, which makes the corpus loop data
// parallel. The serial walk is the reference; the parallel walk must
// produce element-wise identical results for any worker count.
std::vector<PageAnalysis> analyze_corpus_serial(const std::vector<std::string>& files,
                                                const AnalyzeOptions& options);
std::vector<PageAnalysis> analyze_corpus_parallel(const std::vector<std::string>& files,
                                                  const AnalyzeOptions& options);

// Dispatches on options.workers (1 = serial reference).
std::vector<PageAnalysis> analyze_corpus(const std::vector<std::string>& files,
                                         const AnalyzeOptions& options);

// In-memory variants used by tests and the benchmark.
std::vector<PageAnalysis> analyze_timelines_serial(const std::vector<SessionTimeline>& timelines,
                                                   FetchMode fetch);
std::vector<PageAnalysis> analyze_timelines_parallel(const std::vector<SessionTimeline>& timelines,
                                                     FetchMode fetch, int workers = 0);

}  // namespace h2reuse
