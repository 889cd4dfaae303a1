#include "h2reuse/corpus.hpp"

#include <algorithm>
#include <filesystem>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace h2reuse {

namespace fs = std::filesystem;

PageAnalysis analyze_timeline(const SessionTimeline& timeline, FetchMode fetch) {
  PageFindings findings = analyze_page(timeline, fetch);
  PoolPolicy policy;
  policy.credentials_partitioning = fetch == FetchMode::FOLLOW_FETCH;
  SimResult sim = simulate_pool(timeline, policy);
  return build_page_analysis(timeline, fetch, findings, sim);
}

PageAnalysis analyze_file(const std::string& path, const AnalyzeOptions& options) {
  SessionTimeline timeline;
  if (options.kind == InputKind::HAR) {
    HarOptions har = options.har;
    har.model = options.model;
    timeline = ingest_har_file(path, har);
  } else {
    timeline = ingest_netlog_file(path, options.netlog_names);
  }
  if (timeline.page_url.empty()) timeline.page_url = fs::path(path).stem().string();
  return analyze_timeline(timeline, options.fetch);
}

std::vector<std::string> collect_input_files(const std::vector<std::string>& inputs,
                                             InputKind kind) {
  auto matches = [&](const fs::path& p) {
    std::string name = to_lower_ascii(p.filename().string());
    if (name.ends_with(".gz")) name = name.substr(0, name.size() - 3);
    if (kind == InputKind::HAR) return name.ends_with(".har");
    return name.ends_with(".json") || name.ends_with(".netlog");
  };

  std::vector<std::string> files;
  for (const std::string& input : inputs) {
    fs::path p(input);
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file() && matches(entry.path()))
          files.push_back(entry.path().string());
    } else if (fs::exists(p)) {
      files.push_back(p.string());
    } else {
      throw Error("input does not exist: " + input);
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

std::vector<PageAnalysis> analyze_corpus_serial(const std::vector<std::string>& files,
                                                const AnalyzeOptions& options) {
  std::vector<PageAnalysis> out;
  out.reserve(files.size());
  for (const std::string& file : files) out.push_back(analyze_file(file, options));
  return out;
}

std::vector<PageAnalysis> analyze_corpus_parallel(const std::vector<std::string>& files,
                                                  const AnalyzeOptions& options) {
  std::vector<PageAnalysis> out(files.size());
  std::exception_ptr failure;

#ifdef _OPENMP
  int threads = options.workers > 0 ? options.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (int64_t i = 0; i < static_cast<int64_t>(files.size()); ++i) {
    try {
      out[static_cast<size_t>(i)] = analyze_file(files[static_cast<size_t>(i)], options);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<PageAnalysis> analyze_corpus(const std::vector<std::string>& files,
                                         const AnalyzeOptions& options) {
  if (options.workers == 1) return analyze_corpus_serial(files, options);
  return analyze_corpus_parallel(files, options);
}

std::vector<PageAnalysis> analyze_timelines_serial(const std::vector<SessionTimeline>& timelines,
                                                   FetchMode fetch) {
  std::vector<PageAnalysis> out;
  out.reserve(timelines.size());
  for (const SessionTimeline& t : timelines) out.push_back(analyze_timeline(t, fetch));
  return out;
}

std::vector<PageAnalysis> analyze_timelines_parallel(const std::vector<SessionTimeline>& timelines,
                                                     FetchMode fetch, int workers) {
  std::vector<PageAnalysis> out(timelines.size());
  std::exception_ptr failure;
  (void)workers;

#ifdef _OPENMP
  int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (int64_t i = 0; i < static_cast<int64_t>(timelines.size()); ++i) {
    try {
      out[static_cast<size_t>(i)] = analyze_timeline(timelines[static_cast<size_t>(i)], fetch);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace h2reuse
