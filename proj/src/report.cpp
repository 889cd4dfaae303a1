#include "h2reuse/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

namespace h2reuse {

Ip2Asn Ip2Asn::load_file(const std::string& path) {
  return parse(read_file(path), path);
}

Ip2Asn Ip2Asn::parse(std::string_view content, const std::string& source) {
  Ip2Asn map;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= content.size()) {
    size_t eol = content.find('\n', pos);
    std::string_view line = content.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? content.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    auto fail = [&](const char* why) {
      throw LoadError(source + ":" + std::to_string(line_no) + ": " + why);
    };
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() < 3) fail("expected prefix<TAB>asn<TAB>name");
    std::vector<std::string> prefix_parts = split(fields[0], '/');
    if (prefix_parts.size() != 2) fail("prefix must be addr/len");

    IpAddress addr;
    try {
      addr = IpAddress::parse(prefix_parts[0]);
    } catch (const ParseError&) {
      fail("unparseable prefix address");
    }
    int len = -1;
    try {
      len = std::stoi(prefix_parts[1]);
    } catch (const std::exception&) {
      fail("unparseable prefix length");
    }
    int max_len = addr.family() == IpFamily::V4 ? 32 : 128;
    if (len < 0 || len > max_len) fail("prefix length out of range");

    uint32_t asn = 0;
    try {
      asn = static_cast<uint32_t>(std::stoul(fields[1]));
    } catch (const std::exception&) {
      fail("unparseable ASN");
    }

    std::string masked(reinterpret_cast<const char*>(addr.data()), addr.size());
    for (size_t i = 0; i < masked.size(); ++i) {
      int bits = std::clamp(len - static_cast<int>(i) * 8, 0, 8);
      masked[i] = static_cast<char>(masked[i] & (bits == 0 ? 0 : 0xff << (8 - bits)));
    }
    AsInfo info{asn, std::string(trim(fields[2]))};
    (addr.family() == IpFamily::V4 ? map.v4_ : map.v6_)[len][masked] = std::move(info);
  }
  return map;
}

std::optional<Ip2Asn::AsInfo> Ip2Asn::lookup(const IpAddress& ip) const {
  const Table& table = ip.family() == IpFamily::V4 ? v4_ : v6_;
  std::string bytes(reinterpret_cast<const char*>(ip.data()), ip.size());
  for (const auto& [len, prefixes] : table) {  // descending length
    std::string masked = bytes;
    for (size_t i = 0; i < masked.size(); ++i) {
      int bits = std::clamp(len - static_cast<int>(i) * 8, 0, 8);
      masked[i] = static_cast<char>(masked[i] & (bits == 0 ? 0 : 0xff << (8 - bits)));
    }
    if (auto it = prefixes.find(masked); it != prefixes.end()) return it->second;
  }
  return std::nullopt;
}

CorpusAggregator::CorpusAggregator(std::string corpus_label)
    : corpus_(std::move(corpus_label)) {}

void CorpusAggregator::add_page(const PageAnalysis& page) {
  if (!configured_) {
    model_ = page.model;
    fetch_ = page.fetch;
    configured_ = true;
  } else if (page.model != model_ || page.fetch != fetch_) {
    throw ConfigError("mixed duration models or fetch modes in one corpus");
  }
  ++pages_;
  filters_ += page.filters;
  warnings_ += page.warnings;
  port_mismatch_ += page.port_mismatch_san_matches;
  sim_.observed += page.sim.observed;
  sim_.opened += page.sim.opened;
  sim_.saved += page.sim.saved;
  if (page.lifetimes) {
    lifetime_total_ += page.lifetimes->total_sessions;
    lifetime_closed_ += page.lifetimes->closed_sessions;
    if (page.lifetimes->closed_sessions > 0)
      lifetime_medians_.push_back(page.lifetimes->median_closed_lifetime_ms);
  }

  if (page.connections.empty()) return;
  ++total_sites_;
  total_connections_ += page.connections.size();

  std::map<ConnId, const ConnRecord*> by_id;
  for (const ConnRecord& rec : page.connections) by_id.emplace(rec.conn_id, &rec);

  size_t page_redundant = 0;
  std::map<Cause, bool> site_has_cause;
  for (const ConnRecord& rec : page.connections) {
    all_by_issuer_[rec.issuer_org].connections += 1;
    all_by_issuer_[rec.issuer_org].domains[rec.origin.host.str()] += 1;

    if (!rec.redundant()) continue;
    ++page_redundant;

    for (const auto& [cause, attribution] : rec.causes) {
      ++per_cause_[cause].connections;
      site_has_cause[cause] = true;

      switch (cause) {
        case Cause::IP: {
          PrevTally& tally = ip_by_origin_[rec.origin.host.str()];
          ++tally.connections;
          ++tally.prev[attribution.prev_origin.host.str()];
          EndpointTally& ep = ip_by_endpoint_[rec.endpoint.ip];
          ++ep.connections;
          ++ep.domains[rec.origin.host.str()];
          break;
        }
        case Cause::CERT: {
          IssuerTally& issuer = cert_by_issuer_[rec.issuer_org];
          ++issuer.connections;
          ++issuer.domains[rec.origin.host.str()];
          DomainTally& dom = cert_by_domain_[rec.origin.host.str()];
          ++dom.connections;
          ++dom.prev[attribution.prev_origin.host.str()];
          ++dom.issuers[rec.issuer_org];
          break;
        }
        case Cause::CRED: {
          ++cred_findings_;
          bool same_domain = false;
          for (const ConnId& witness_id : attribution.witnesses) {
            auto it = by_id.find(witness_id);
            if (it != by_id.end() && it->second->origin.host == rec.origin.host) {
              same_domain = true;
              break;
            }
          }
          if (same_domain) ++cred_same_domain_;
          break;
        }
      }
    }
  }

  redundant_connections_ += page_redundant;
  if (page_redundant > 0) ++redundant_sites_;
  for (const auto& [cause, present] : site_has_cause)
    if (present) ++per_cause_[cause].sites;
  ++redundant_per_site_[page_redundant];
}

namespace {

// Sorts tally maps into rank order: count descending, name ascending.
template <typename Map, typename Count>
std::vector<std::pair<std::string, const typename Map::mapped_type*>> ranked(
    const Map& map, Count count, size_t top_n) {
  std::vector<std::pair<std::string, const typename Map::mapped_type*>> rows;
  rows.reserve(map.size());
  for (const auto& [key, value] : map) rows.emplace_back(key, &value);
  std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
    size_t ca = count(*a.second), cb = count(*b.second);
    if (ca != cb) return ca > cb;
    return a.first < b.first;
  });
  if (rows.size() > top_n) rows.resize(top_n);
  return rows;
}

std::pair<std::string, size_t> mode_of(const std::map<std::string, size_t>& counts) {
  std::string best;
  size_t best_count = 0;
  for (const auto& [key, count] : counts) {
    if (count > best_count || (count == best_count && (best.empty() || key < best))) {
      best = key;
      best_count = count;
    }
  }
  return {best, best_count};
}

}  // namespace

CorpusReport CorpusAggregator::finalize(size_t top_n, const Ip2Asn* ip2asn) const {
  CorpusReport report;
  report.corpus = corpus_;
  report.model = model_;
  report.fetch = fetch_;
  report.total_sites = total_sites_;
  report.total_connections = total_connections_;
  report.redundant_sites = redundant_sites_;
  report.redundant_connections = redundant_connections_;
  report.per_cause = per_cause_;
  report.sim = sim_;
  report.filters = filters_;
  report.warnings = warnings_;
  report.port_mismatch_san_matches = port_mismatch_;
  report.lifetime_total_sessions = lifetime_total_;
  report.lifetime_closed_sessions = lifetime_closed_;
  report.closed_lifetime_medians = lifetime_medians_;
  if (cred_findings_ > 0)
    report.cred_same_domain_share =
        static_cast<double>(cred_same_domain_) / static_cast<double>(cred_findings_);

  // Redundancy distribution: fraction of sites with >= k redundant conns.
  size_t max_redundant = 0;
  for (const auto& [k, sites] : redundant_per_site_) max_redundant = std::max(max_redundant, k);
  if (total_sites_ > 0) {
    std::vector<size_t> per_k(max_redundant + 1, 0);
    for (const auto& [k, sites] : redundant_per_site_) per_k[k] = sites;
    std::vector<size_t> suffix(max_redundant + 2, 0);
    for (size_t k = max_redundant + 1; k-- > 0;) suffix[k] = suffix[k + 1] + per_k[k];
    for (size_t k = 0; k <= max_redundant; ++k)
      report.redundancy_cdf.emplace_back(
          k, static_cast<double>(suffix[k]) / static_cast<double>(total_sites_));
  }

  size_t rank = 0;
  for (const auto& [origin, tally] :
       ranked(ip_by_origin_, [](const PrevTally& t) { return t.connections; }, top_n)) {
    IpOriginRow row;
    row.rank = ++rank;
    row.origin = origin;
    row.connections = tally->connections;
    std::tie(row.top_prev_origin, row.top_prev_connections) = mode_of(tally->prev);
    report.top_ip_origins.push_back(std::move(row));
  }

  rank = 0;
  for (const auto& [issuer, tally] :
       ranked(cert_by_issuer_, [](const IssuerTally& t) { return t.connections; }, top_n)) {
    report.cert_issuers.push_back(
        IssuerRow{++rank, issuer, tally->connections, tally->domains.size()});
  }

  rank = 0;
  for (const auto& [issuer, tally] :
       ranked(all_by_issuer_, [](const IssuerTally& t) { return t.connections; }, top_n)) {
    report.issuer_share.push_back(
        IssuerRow{++rank, issuer, tally->connections, tally->domains.size()});
  }

  rank = 0;
  for (const auto& [domain, tally] :
       ranked(cert_by_domain_, [](const DomainTally& t) { return t.connections; }, top_n)) {
    CertDomainRow row;
    row.rank = ++rank;
    row.domain = domain;
    row.connections = tally->connections;
    std::tie(row.top_prev_domain, row.top_prev_connections) = mode_of(tally->prev);
    row.issuer_org = mode_of(tally->issuers).first;
    report.cert_domains.push_back(std::move(row));
  }

  if (ip2asn) {
    struct Group {
      std::string name;
      size_t connections = 0;
      std::map<std::string, size_t> domains;
    };
    std::map<std::string, Group> by_asn;
    for (const auto& [ip, tally] : ip_by_endpoint_) {
      std::string key = "UNMAPPED";
      std::string name;
      if (auto info = ip2asn->lookup(ip)) {
        key = "AS" + std::to_string(info->asn);
        name = info->name;
      }
      Group& group = by_asn[key];
      group.name = name;
      group.connections += tally.connections;
      for (const auto& [domain, count] : tally.domains) group.domains[domain] += count;
    }
    rank = 0;
    for (const auto& [asn, group] :
         ranked(by_asn, [](const Group& g) { return g.connections; }, top_n)) {
      report.asn_rows.push_back(
          AsnRow{++rank, asn, group->name, group->connections, group->domains.size()});
    }
  }
  return report;
}

CorpusReport aggregate_corpus(const std::vector<PageAnalysis>& pages,
                              const std::string& corpus_label, size_t top_n,
                              const Ip2Asn* ip2asn) {
  CorpusAggregator aggregator(corpus_label);
  for (const PageAnalysis& page : pages) aggregator.add_page(page);
  return aggregator.finalize(top_n, ip2asn);
}

std::vector<IpOriginRow> top_ip_origins(const std::vector<PageAnalysis>& pages, size_t n) {
  return aggregate_corpus(pages, "t", n).top_ip_origins;
}

std::vector<IssuerRow> cert_issuer_table(const std::vector<PageAnalysis>& pages,
                                         IssuerScope scope, size_t n) {
  CorpusReport report = aggregate_corpus(pages, "t", n);
  return scope == IssuerScope::CERT_ONLY ? report.cert_issuers : report.issuer_share;
}

std::vector<CertDomainRow> cert_domain_table(const std::vector<PageAnalysis>& pages, size_t n) {
  return aggregate_corpus(pages, "t", n).cert_domains;
}

std::vector<AsnRow> asn_table(const std::vector<PageAnalysis>& pages, const Ip2Asn& ip2asn,
                              size_t n) {
  return aggregate_corpus(pages, "t", n, &ip2asn).asn_rows;
}

std::optional<double> cred_same_domain_share(const std::vector<PageAnalysis>& pages) {
  return aggregate_corpus(pages, "t", 1).cred_same_domain_share;
}

std::string normalize_page_url(std::string_view url) {
  std::string s = to_lower_ascii(trim(url));
  for (std::string_view scheme : {"https://", "http://"})
    if (s.rfind(scheme, 0) == 0) {
      s = s.substr(scheme.size());
      break;
    }
  if (s.rfind("www.", 0) == 0) s = s.substr(4);
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

std::pair<std::vector<PageAnalysis>, std::vector<PageAnalysis>> intersect_corpora(
    const std::vector<PageAnalysis>& a, const std::vector<PageAnalysis>& b) {
  std::set<std::string> keys_a, keys_b;
  for (const PageAnalysis& page : a) keys_a.insert(normalize_page_url(page.page_url));
  for (const PageAnalysis& page : b) keys_b.insert(normalize_page_url(page.page_url));

  std::pair<std::vector<PageAnalysis>, std::vector<PageAnalysis>> out;
  for (const PageAnalysis& page : a)
    if (keys_b.count(normalize_page_url(page.page_url)) != 0) out.first.push_back(page);
  for (const PageAnalysis& page : b)
    if (keys_a.count(normalize_page_url(page.page_url)) != 0) out.second.push_back(page);
  return out;
}

namespace {

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string cause_row(const CorpusReport& r, Cause c) {
  auto it = r.per_cause.find(c);
  size_t sites = it == r.per_cause.end() ? 0 : it->second.sites;
  size_t conns = it == r.per_cause.end() ? 0 : it->second.connections;
  std::ostringstream out;
  out << cause_name(c) << "," << sites << "," << conns << "\n";
  return std::move(out).str();
}

}  // namespace

std::string table1_csv(const CorpusReport& r) {
  std::ostringstream out;
  out << "cause,sites,connections\n";
  for (Cause c : kAllCauses) out << cause_row(r, c);
  out << "REDUNDANT," << r.redundant_sites << "," << r.redundant_connections << "\n";
  out << "TOTAL," << r.total_sites << "," << r.total_connections << "\n";
  return std::move(out).str();
}

std::string cdf_csv(const CorpusReport& r) {
  std::ostringstream out;
  out << "redundant_connections,site_fraction_at_least\n";
  for (const auto& [k, fraction] : r.redundancy_cdf)
    out << k << "," << format_fraction(fraction) << "\n";
  return std::move(out).str();
}

std::string ip_origins_csv(const CorpusReport& r) {
  std::ostringstream out;
  out << "rank,origin,connections,top_prev_origin,top_prev_connections\n";
  for (const IpOriginRow& row : r.top_ip_origins)
    out << row.rank << "," << csv_escape(row.origin) << "," << row.connections << ","
        << csv_escape(row.top_prev_origin) << "," << row.top_prev_connections << "\n";
  return std::move(out).str();
}

namespace {

std::string issuer_table_csv(const std::vector<IssuerRow>& rows) {
  std::ostringstream out;
  out << "rank,issuer,connections,unique_domains\n";
  for (const IssuerRow& row : rows)
    out << row.rank << "," << csv_escape(row.issuer_org) << "," << row.connections << ","
        << row.unique_domains << "\n";
  return std::move(out).str();
}

}  // namespace

std::string cert_issuers_csv(const CorpusReport& r) { return issuer_table_csv(r.cert_issuers); }
std::string issuer_share_csv(const CorpusReport& r) { return issuer_table_csv(r.issuer_share); }

std::string cert_domains_csv(const CorpusReport& r) {
  std::ostringstream out;
  out << "rank,domain,connections,top_prev_domain,top_prev_connections,issuer\n";
  for (const CertDomainRow& row : r.cert_domains)
    out << row.rank << "," << csv_escape(row.domain) << "," << row.connections << ","
        << csv_escape(row.top_prev_domain) << "," << row.top_prev_connections << ","
        << csv_escape(row.issuer_org) << "\n";
  return std::move(out).str();
}

std::string asn_csv(const CorpusReport& r) {
  std::ostringstream out;
  out << "rank,asn,name,connections,unique_domains\n";
  for (const AsnRow& row : r.asn_rows)
    out << row.rank << "," << csv_escape(row.asn) << "," << csv_escape(row.name) << ","
        << row.connections << "," << row.unique_domains << "\n";
  return std::move(out).str();
}

std::string intersect_csv(const CorpusReport& a, const CorpusReport& b) {
  std::ostringstream out;
  out << "side,cause,sites,connections\n";
  for (const CorpusReport* r : {&a, &b}) {
    for (Cause c : kAllCauses) {
      auto it = r->per_cause.find(c);
      out << csv_escape(r->corpus) << "," << cause_name(c) << ","
          << (it == r->per_cause.end() ? 0 : it->second.sites) << ","
          << (it == r->per_cause.end() ? 0 : it->second.connections) << "\n";
    }
    out << csv_escape(r->corpus) << ",REDUNDANT," << r->redundant_sites << ","
        << r->redundant_connections << "\n";
    out << csv_escape(r->corpus) << ",TOTAL," << r->total_sites << "," << r->total_connections
        << "\n";
  }
  return std::move(out).str();
}

std::string summary_text(const CorpusReport& r) {
  std::ostringstream out;
  out << "# connection redundancy summary\n";
  out << "corpus=" << r.corpus << "\n";
  out << "model=" << duration_model_name(r.model) << "\n";
  out << "fetch=" << fetch_mode_name(r.fetch) << "\n";
  out << "\n[totals]\n";
  out << "sites=" << r.total_sites << "\n";
  out << "connections=" << r.total_connections << "\n";
  out << "redundant_sites=" << r.redundant_sites << "\n";
  out << "redundant_connections=" << r.redundant_connections << "\n";
  for (Cause c : kAllCauses) {
    auto it = r.per_cause.find(c);
    out << "cause_" << cause_name(c) << "_sites="
        << (it == r.per_cause.end() ? 0 : it->second.sites) << "\n";
    out << "cause_" << cause_name(c) << "_connections="
        << (it == r.per_cause.end() ? 0 : it->second.connections) << "\n";
  }
  out << "\n[pool_simulation]\n";
  out << "observed=" << r.sim.observed << "\n";
  out << "opened=" << r.sim.opened << "\n";
  out << "saved=" << r.sim.saved << "\n";
  out << "assumption=stream_limits_unmodeled\n";
  out << "\n[credentials]\n";
  if (r.cred_same_domain_share)
    out << "cred_same_domain_share=" << format_fraction(*r.cred_same_domain_share) << "\n";
  else
    out << "cred_same_domain_share=n/a\n";
  out << "\n[filters]\n";
  const FilterStats& f = r.filters;
  out << "socket_id_zero=" << f.socket_id_zero << "\n";
  out << "missing_ip=" << f.missing_ip << "\n";
  out << "inconsistent_ip=" << f.inconsistent_ip << "\n";
  out << "invalid_method=" << f.invalid_method << "\n";
  out << "invalid_version=" << f.invalid_version << "\n";
  out << "invalid_status=" << f.invalid_status << "\n";
  out << "bad_page_ref=" << f.bad_page_ref << "\n";
  out << "missing_certificate=" << f.missing_certificate << "\n";
  out << "non_h2_protocol=" << f.non_h2_protocol << "\n";
  out << "missing_request_id=" << f.missing_request_id << "\n";
  out << "invalid_url=" << f.invalid_url << "\n";
  out << "invalid_certificate_file=" << f.invalid_certificate_file << "\n";
  out << "\n[warnings]\n";
  const IngestWarnings& w = r.warnings;
  out << "cert_conflicts=" << w.cert_conflicts << "\n";
  out << "ip_sans_ignored=" << w.ip_sans_ignored << "\n";
  out << "bad_sans_ignored=" << w.bad_sans_ignored << "\n";
  out << "unknown_codes=" << w.unknown_codes << "\n";
  out << "truncated_tail=" << w.truncated_tail << "\n";
  out << "unbound_requests=" << w.unbound_requests << "\n";
  out << "dropped_sessions=" << w.dropped_sessions << "\n";
  out << "port_mismatch_san_matches=" << r.port_mismatch_san_matches << "\n";
  if (r.model == DurationModel::MEASURED) {
    out << "\n[lifetimes]\n";
    out << "sessions=" << r.lifetime_total_sessions << "\n";
    out << "closed_before_capture_end=" << r.lifetime_closed_sessions << "\n";
    if (r.lifetime_total_sessions > 0)
      out << "closed_fraction="
          << format_fraction(static_cast<double>(r.lifetime_closed_sessions) /
                             static_cast<double>(r.lifetime_total_sessions))
          << "\n";
    if (!r.closed_lifetime_medians.empty()) {
      std::vector<double> medians = r.closed_lifetime_medians;
      std::sort(medians.begin(), medians.end());
      size_t n = medians.size();
      double overall =
          n % 2 == 1 ? medians[n / 2] : 0.5 * (medians[n / 2 - 1] + medians[n / 2]);
      out << "median_of_page_median_closed_lifetime_ms=" << format_ms(overall) << "\n";
    }
  }
  // Published large-scale crawl magnitudes, for order-of-magnitude
  // comparison only; desk-scale corpora cannot reproduce them.
  out << "\n[reference_scale_2021_crawls]\n";
  out << "http_archive_h2_sites=5883212\n";
  out << "http_archive_redundant_sites_endless=4493097\n";
  out << "http_archive_redundant_sites_immediate=2263751\n";
  out << "alexa100k_redundant_sites=77878\n";
  out << "alexa_median_closed_lifetime_s=122.2\n";
  out << "alexa_closed_fraction=0.035\n";
  return std::move(out).str();
}

std::vector<std::string> write_report_files(const CorpusReport& report,
                                            const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  std::string stem = report.corpus + "_" + duration_model_name(report.model) + "_" +
                     fetch_mode_name(report.fetch) + "_";
  std::vector<std::pair<std::string, std::string>> files{
      {"table1.csv", table1_csv(report)},
      {"fig2_cdf.csv", cdf_csv(report)},
      {"table2_ip_origins.csv", ip_origins_csv(report)},
      {"table3_cert_issuers.csv", cert_issuers_csv(report)},
      {"table4_cert_domains.csv", cert_domains_csv(report)},
      {"table5_issuer_share.csv", issuer_share_csv(report)},
      {"summary.txt", summary_text(report)},
  };
  // The ASN table only exists when a mapping was supplied.
  if (!report.asn_rows.empty()) files.emplace_back("table6_asn.csv", asn_csv(report));

  std::vector<std::string> written;
  for (const auto& [name, content] : files) {
    std::string path = (fs::path(outdir) / (stem + name)).string();
    write_file(path, content);
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace h2reuse
