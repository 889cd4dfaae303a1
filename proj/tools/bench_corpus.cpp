// Compares the serial reference corpus walk against the OpenMP one on a
// synthetic corpus and verifies they produce identical results.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "h2reuse/corpus.hpp"
#include "h2reuse/synthetic.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace h2reuse;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fingerprint(const std::vector<PageAnalysis>& pages) {
  std::string out;
  for (const PageAnalysis& page : pages) out += serialize_page(page);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  size_t pages = argc > 1 ? std::stoul(argv[1]) : 2000;
  size_t max_conns = argc > 2 ? std::stoul(argv[2]) : 24;
  int repeats = argc > 3 ? std::stoi(argv[3]) : 3;

  std::mt19937 rng(20210420);
  synthetic::Options options;
  options.max_connections = max_conns;
  options.with_421 = true;

  std::vector<SessionTimeline> corpus;
  corpus.reserve(pages);
  for (size_t i = 0; i < pages; ++i)
    corpus.push_back(
        synthetic::make_page(rng, options, "https://page" + std::to_string(i) + ".test/"));

  std::printf("corpus: %zu pages, max %zu connections/page\n", pages, max_conns);

  double best_serial = 1e300;
  std::vector<PageAnalysis> serial;
  for (int i = 0; i < repeats; ++i) {
    auto start = std::chrono::steady_clock::now();
    serial = analyze_timelines_serial(corpus, FetchMode::FOLLOW_FETCH);
    best_serial = std::min(best_serial, seconds_since(start));
  }
  std::printf("serial reference: %.3f s\n", best_serial);

  double best_parallel = 1e300;
  std::vector<PageAnalysis> parallel;
  for (int i = 0; i < repeats; ++i) {
    auto start = std::chrono::steady_clock::now();
    parallel = analyze_timelines_parallel(corpus, FetchMode::FOLLOW_FETCH);
    best_parallel = std::min(best_parallel, seconds_since(start));
  }
#ifdef _OPENMP
  std::printf("openmp (%d threads): %.3f s\n", omp_get_max_threads(), best_parallel);
#else
  std::printf("parallel (no OpenMP at build time): %.3f s\n", best_parallel);
#endif
  std::printf("speedup: %.2fx\n", best_serial / best_parallel);

  if (fingerprint(serial) != fingerprint(parallel)) {
    std::fprintf(stderr, "FAIL: serial and parallel results differ\n");
    return 1;
  }
  std::printf("results identical\n");
  return 0;
}
