#include <csignal>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "h2reuse/corpus.hpp"
#include "h2reuse/dnsprobe.hpp"
#include "h2reuse/report.hpp"
#include "h2reuse/version.hpp"

namespace fs = std::filesystem;
using namespace h2reuse;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void handle_interrupt(int) { g_interrupted = 1; }

std::string resolve_outdir(const std::string& flag_value) {
  if (const char* env = std::getenv("H2REUSE_OUTDIR"); env && *env) return env;
  return flag_value;
}

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string kind = "har";
  std::string model = "endless";
  bool model_given = false;
  std::string fetch = "follow";
  std::string out = ".";
  std::string corpus = "corpus";
  std::string format = "ndjson";
  std::string cert_path = "response._securityDetails";
  std::string netlog_map;
  int workers = 0;
  size_t top_n = 10;
};

std::string csv_findings(const FindingsMeta& meta, const std::vector<PageAnalysis>& pages) {
  std::ostringstream out;
  out << "page,conn,ip,port,domain,issuer,open_ms,close_ms,causes,witnesses,prev,sim\n";
  for (const PageAnalysis& page : pages) {
    for (const ConnRecord& rec : page.connections) {
      std::string causes, witnesses, prev;
      for (const auto& [cause, attribution] : rec.causes) {
        if (!causes.empty()) {
          causes += "|";
          witnesses += "|";
          prev += "|";
        }
        causes += cause_name(cause);
        witnesses += std::string(cause_name(cause)) + ":";
        for (size_t i = 0; i < attribution.witnesses.size(); ++i)
          witnesses += (i ? ";" : "") + attribution.witnesses[i];
        prev += std::string(cause_name(cause)) + ":" + attribution.prev_origin.host.str();
      }
      out << csv_escape(page.page_url) << "," << rec.conn_id << "," << rec.endpoint.ip.str()
          << "," << rec.endpoint.port << "," << rec.origin.host.str() << ","
          << csv_escape(rec.issuer_org) << "," << format_ms(rec.open_ms) << ","
          << format_ms(rec.close_ms) << "," << csv_escape(causes) << ","
          << csv_escape(witnesses) << "," << csv_escape(prev) << "," << rec.sim_conn << "\n";
    }
  }
  (void)meta;
  return std::move(out).str();
}

int run_analyze(const AnalyzeArgs& args) {
  AnalyzeOptions options;
  if (args.kind == "har") {
    options.kind = InputKind::HAR;
  } else if (args.kind == "netlog") {
    options.kind = InputKind::NETLOG;
  } else {
    throw ConfigError("unknown input kind: " + args.kind);
  }
  if (options.kind == InputKind::NETLOG && args.model_given)
    throw ConfigError("event-log input carries measured lifetimes; --model does not apply");
  auto model = duration_model_from_name(args.model);
  auto fetch = fetch_mode_from_name(args.fetch);
  if (!model || *model == DurationModel::MEASURED)
    throw ConfigError("bad --model (endless|immediate): " + args.model);
  if (!fetch) throw ConfigError("bad --fetch (follow|ignore): " + args.fetch);
  options.model = *model;
  options.fetch = *fetch;
  options.workers = args.workers;
  options.har.cert_path = args.cert_path;
  if (!args.netlog_map.empty()) options.netlog_names = EventNameMap::load_file(args.netlog_map);
  if (args.format != "ndjson" && args.format != "csv")
    throw ConfigError("bad --format (csv|ndjson): " + args.format);

  std::vector<std::string> files = collect_input_files(args.inputs, options.kind);
  std::vector<PageAnalysis> pages = analyze_corpus(files, options);

  std::string outdir = resolve_outdir(args.out);
  fs::create_directories(outdir);
  DurationModel effective_model =
      options.kind == InputKind::NETLOG ? DurationModel::MEASURED : options.model;
  std::string stem = args.corpus + "_" + duration_model_name(effective_model) + "_" +
                     fetch_mode_name(options.fetch) + "_";

  FindingsMeta meta;
  meta.tool_version = kToolVersion;
  meta.map_version = options.netlog_names.version;
  meta.corpus = args.corpus;
  meta.model = effective_model;
  meta.fetch = options.fetch;

  std::string findings_path;
  if (args.format == "ndjson") {
    findings_path = (fs::path(outdir) / (stem + "findings.ndjson")).string();
    std::ofstream out(findings_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + findings_path);
    out << serialize_meta(meta);
    for (const PageAnalysis& page : pages) out << serialize_page(page);
  } else {
    findings_path = (fs::path(outdir) / (stem + "findings.csv")).string();
    write_file(findings_path, csv_findings(meta, pages));
  }

  CorpusAggregator aggregator(args.corpus);
  for (const PageAnalysis& page : pages) aggregator.add_page(page);
  CorpusReport report = aggregator.finalize(args.top_n);
  std::string summary_path = (fs::path(outdir) / (stem + "summary.txt")).string();
  write_file(summary_path, summary_text(report));

  std::cout << "analyzed " << pages.size() << " page(s), " << report.total_connections
            << " connection(s), " << report.redundant_connections << " redundant\n"
            << "findings: " << findings_path << "\n"
            << "summary:  " << summary_path << "\n";
  return 0;
}

struct ReportArgs {
  std::vector<std::string> findings;
  std::string out = ".";
  std::string corpus;
  std::string ip2asn;
  std::string intersect_path;
  bool want_asn = false;
  size_t top_n = 10;
};

int run_report(const ReportArgs& args) {
  if (args.want_asn && args.ip2asn.empty())
    throw ConfigError("--asn needs an --ip2asn mapping file");

  std::vector<FindingsFile> inputs;
  for (const std::string& path : args.findings) {
    if (path.ends_with(".csv"))
      throw ConfigError("report reads ndjson findings; CSV findings are export-only");
    inputs.push_back(parse_findings_file(path));
  }
  if (inputs.empty()) throw ConfigError("no findings inputs");
  for (size_t i = 1; i < inputs.size(); ++i)
    if (inputs[i].meta.model != inputs[0].meta.model ||
        inputs[i].meta.fetch != inputs[0].meta.fetch)
      throw ConfigError("mixed duration models or fetch modes across findings inputs");

  std::string corpus = args.corpus.empty() ? inputs[0].meta.corpus : args.corpus;
  Ip2Asn ip2asn;
  bool have_asn = false;
  if (!args.ip2asn.empty()) {
    ip2asn = Ip2Asn::load_file(args.ip2asn);
    have_asn = true;
  }

  std::string outdir = resolve_outdir(args.out);
  fs::create_directories(outdir);

  CorpusAggregator aggregator(corpus);
  for (const FindingsFile& file : inputs)
    for (const PageAnalysis& page : file.pages) aggregator.add_page(page);
  CorpusReport report = aggregator.finalize(args.top_n, have_asn ? &ip2asn : nullptr);
  std::vector<std::string> written = write_report_files(report, outdir);

  if (!args.intersect_path.empty()) {
    FindingsFile other = parse_findings_file(args.intersect_path);
    if (other.meta.model != inputs[0].meta.model || other.meta.fetch != inputs[0].meta.fetch)
      throw ConfigError("intersect corpus uses a different model or fetch mode");
    std::vector<PageAnalysis> mine;
    for (const FindingsFile& file : inputs)
      mine.insert(mine.end(), file.pages.begin(), file.pages.end());
    auto [a_pages, b_pages] = intersect_corpora(mine, other.pages);

    CorpusAggregator agg_a(corpus + "_overlap");
    for (const PageAnalysis& page : a_pages) agg_a.add_page(page);
    std::string other_label = other.meta.corpus.empty() ? "other" : other.meta.corpus;
    CorpusAggregator agg_b(other_label + "_overlap");
    for (const PageAnalysis& page : b_pages) agg_b.add_page(page);
    CorpusReport report_a = agg_a.finalize(args.top_n, have_asn ? &ip2asn : nullptr);
    CorpusReport report_b = agg_b.finalize(args.top_n, have_asn ? &ip2asn : nullptr);

    std::string name = corpus + "_vs_" + other_label + "_" +
                       duration_model_name(report.model) + "_" + fetch_mode_name(report.fetch) +
                       "_table7.csv";
    std::string path = (fs::path(outdir) / name).string();
    write_file(path, intersect_csv(report_a, report_b));
    written.push_back(path);
  }

  for (const std::string& path : written) std::cout << "wrote " << path << "\n";
  return 0;
}

struct DnsProbeArgs {
  std::string resolvers_path;
  std::string domains_path;
  std::string scripted;
  std::string out = ".";
  double interval_s = 360;  // the published cadence
  size_t rounds = 0;        // 0 = until duration elapses / script ends
  double duration_s = 0;
  bool ecs_probe = false;
  std::vector<std::string> pairs;
};

int run_dnsprobe(const DnsProbeArgs& args) {
  ProbePlan plan;
  plan.resolvers = load_resolver_list(args.resolvers_path);
  plan.domains = load_domain_list(args.domains_path);
  if (plan.resolvers.empty()) throw ConfigError("resolver list is empty");
  if (plan.domains.empty()) throw ConfigError("domain list is empty");

  std::vector<std::pair<DnsName, DnsName>> pairs;
  if (args.pairs.empty()) {
    for (size_t i = 0; i < plan.domains.size(); ++i)
      for (size_t j = i + 1; j < plan.domains.size(); ++j)
        pairs.emplace_back(plan.domains[i], plan.domains[j]);
  } else {
    for (const std::string& spec : args.pairs) {
      std::vector<std::string> parts = split(spec, ':');
      if (parts.size() != 2) throw ConfigError("bad --pair (a.tld:b.tld): " + spec);
      pairs.emplace_back(DnsName::parse(parts[0]), DnsName::parse(parts[1]));
    }
  }

  std::string outdir = resolve_outdir(args.out);
  fs::create_directories(outdir);
  std::string snapshots_path = (fs::path(outdir) / "snapshots.ndjson").string();
  std::ofstream snapshots_out(snapshots_path, std::ios::binary | std::ios::trunc);
  if (!snapshots_out) throw Error("cannot write " + snapshots_path);

  std::optional<ScriptedDnsClient> scripted;
  WireDnsClient wire(std::chrono::milliseconds(3000), args.ecs_probe);
  size_t rounds = args.rounds;
  if (!args.scripted.empty()) {
    scripted = ScriptedDnsClient::load_file(args.scripted);
    if (rounds == 0 || rounds > scripted->slot_count()) rounds = scripted->slot_count();
  } else if (rounds == 0) {
    if (args.duration_s <= 0)
      throw ConfigError("live probing needs --rounds or --duration");
    rounds = static_cast<size_t>(args.duration_s / args.interval_s) + 1;
  }

  std::signal(SIGINT, handle_interrupt);
  std::signal(SIGTERM, handle_interrupt);

  std::vector<ResolutionSnapshot> snapshots;
  for (size_t round = 0; round < rounds && !g_interrupted; ++round) {
    int64_t now_ms;
    DnsClient client;
    if (scripted) {
      scripted->set_slot(round);
      now_ms = static_cast<int64_t>(round) * static_cast<int64_t>(args.interval_s * 1000);
      client = [&](const ResolverSpec& r, const DnsName& d) { return (*scripted)(r, d); };
    } else {
      now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
      client = [&](const ResolverSpec& r, const DnsName& d) { return wire(r, d); };
    }

    ResolutionSnapshot snapshot = probe_round(plan, client, now_ms);
    snapshots_out << snapshot_to_json_line(plan, snapshot);
    snapshots_out.flush();  // each round survives an interrupt
    snapshots.push_back(std::move(snapshot));
    std::cout << "round " << round + 1 << "/" << rounds
              << (snapshots.back().complete() ? "" : " (incomplete)") << "\n";

    if (!scripted && round + 1 < rounds) {
      double waited = 0;
      while (waited < args.interval_s && !g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        waited += 0.1;
      }
    }
  }

  // Skipped-slot log: every failed cell of every incomplete slot.
  std::ostringstream skipped;
  size_t skipped_count = 0;
  for (const ResolutionSnapshot& snapshot : snapshots) {
    if (snapshot.complete()) continue;
    ++skipped_count;
    for (size_t r = 0; r < plan.resolvers.size(); ++r)
      for (size_t d = 0; d < plan.domains.size(); ++d)
        if (!snapshot.cells[r][d])
          skipped << snapshot.timeslot_unix_ms << "\t" << plan.resolvers[r].address.str()
                  << "\t" << plan.domains[d].str() << "\n";
  }
  write_file((fs::path(outdir) / "skipped_slots.log").string(), skipped.str());

  for (const auto& [a, b] : pairs) {
    OverlapSeries series = overlap_series(plan, snapshots, a, b);
    std::string name = "overlap_" + a.str() + "__" + b.str() + ".csv";
    write_file((fs::path(outdir) / name).string(), overlap_csv(series));
  }
  if (args.ecs_probe && !wire.ecs_seen().empty()) {
    std::cerr << "warning: client-subnet option echoed by:";
    for (const std::string& ip : wire.ecs_seen()) std::cerr << " " << ip;
    std::cerr << "\n";
  }

  std::cout << "persisted " << snapshots.size() << " snapshot(s) (" << skipped_count
            << " incomplete), " << pairs.size() << " overlap series → " << outdir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HTTP/2 connection-redundancy trace analyzer"};
  app.require_subcommand(0, 1);

  bool version = false;
  app.add_flag("--version", version, "print tool and event-mapping versions");

  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand("analyze", "ingest traces, classify, simulate pool");
  analyze->add_option("inputs", analyze_args.inputs, "trace files or directories")->required();
  analyze->add_option("--kind", analyze_args.kind, "input kind: har|netlog");
  CLI::Option* model_opt =
      analyze->add_option("--model", analyze_args.model, "duration model: endless|immediate");
  analyze->add_option("--fetch", analyze_args.fetch, "fetch mode: follow|ignore");
  analyze->add_option("--out", analyze_args.out, "output directory");
  analyze->add_option("--corpus", analyze_args.corpus, "corpus label used in file names");
  analyze->add_option("--format", analyze_args.format, "findings format: csv|ndjson");
  analyze->add_option("--cert-path", analyze_args.cert_path,
                      "dotted path of the TLS details inside each HAR entry");
  analyze->add_option("--netlog-map", analyze_args.netlog_map,
                      "event-name mapping file overriding the built-in one");
  analyze->add_option("--workers", analyze_args.workers, "worker count (0 = all cores)");
  analyze->add_option("--top", analyze_args.top_n, "rows per ranked table");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "aggregate findings into tables");
  report->add_option("findings", report_args.findings, "findings.ndjson files")->required();
  report->add_option("--out", report_args.out, "output directory");
  report->add_option("--corpus", report_args.corpus, "corpus label override");
  report->add_option("--ip2asn", report_args.ip2asn, "prefix<TAB>asn<TAB>name mapping file");
  report->add_flag("--asn", report_args.want_asn, "emit the per-AS table (needs --ip2asn)");
  report->add_option("--intersect", report_args.intersect_path,
                     "second findings file; restrict both to common pages");
  report->add_option("--top", report_args.top_n, "rows per ranked table");

  DnsProbeArgs probe_args;
  CLI::App* probe = app.add_subcommand("dnsprobe", "resolver-overlap measurement");
  probe->add_option("--resolvers", probe_args.resolvers_path, "ip<TAB>label resolver list")
      ->required();
  probe->add_option("--domains", probe_args.domains_path, "domain list, one per line")
      ->required();
  probe->add_option("--scripted", probe_args.scripted, "scripted resolver fixture (offline)");
  probe->add_option("--out", probe_args.out, "output directory");
  probe->add_option("--interval", probe_args.interval_s, "seconds between rounds");
  probe->add_option("--rounds", probe_args.rounds, "number of rounds");
  probe->add_option("--duration", probe_args.duration_s, "total probing time in seconds");
  probe->add_flag("--ecs-probe", probe_args.ecs_probe,
                  "send a zero-scope client-subnet option and warn when echoed");
  probe->add_option("--pair", probe_args.pairs, "domain pair a.tld:b.tld (default: all pairs)");

  CLI11_PARSE(app, argc, argv);

  if (version) {
    std::cout << "h2reuse " << kToolVersion << " (event map "
              << EventNameMap::builtin().version << ")\n";
    return 0;
  }

  try {
    if (analyze->parsed()) {
      analyze_args.model_given = model_opt->count() > 0;
      return run_analyze(analyze_args);
    }
    if (report->parsed()) return run_report(report_args);
    if (probe->parsed()) return run_dnsprobe(probe_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << app.help();
  return 0;
}
