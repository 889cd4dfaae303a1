#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "h2reuse/records.hpp"

namespace h2reuse {

// Offline IP-to-AS mapping with longest-prefix matching. The input is
// tab-separated `prefix<TAB>asn<TAB>name` lines.
class Ip2Asn {
 public:
  struct AsInfo {
    uint32_t asn = 0;
    std::string name;
  };

  static Ip2Asn load_file(const std::string& path);   // throws LoadError with line number
  static Ip2Asn parse(std::string_view content, const std::string& source = "<ip2asn>");

  std::optional<AsInfo> lookup(const IpAddress& ip) const;
  bool empty() const { return v4_.empty() && v6_.empty(); }

 private:
  // family-specific: prefix length -> masked address bytes -> info
  using Table = std::map<int, std::map<std::string, AsInfo>, std::greater<>>;
  Table v4_;
  Table v6_;
};

struct CauseTally {
  size_t sites = 0;
  size_t connections = 0;
};

struct IpOriginRow {
  size_t rank = 0;
  std::string origin;
  size_t connections = 0;
  std::string top_prev_origin;  // most frequent previous origin
  size_t top_prev_connections = 0;
};

struct IssuerRow {
  size_t rank = 0;
  std::string issuer_org;
  size_t connections = 0;
  size_t unique_domains = 0;
};

struct CertDomainRow {
  size_t rank = 0;
  std::string domain;
  size_t connections = 0;
  std::string top_prev_domain;
  size_t top_prev_connections = 0;
  std::string issuer_org;  // most frequent issuer for this domain
};

struct AsnRow {
  size_t rank = 0;
  std::string asn;  // "AS<number>" or "UNMAPPED"
  std::string name;
  size_t connections = 0;
  size_t unique_domains = 0;
};

enum class IssuerScope { CERT_ONLY, ALL_CONNECTIONS };

struct CorpusReport {
  std::string corpus;
  DurationModel model = DurationModel::ENDLESS;
  FetchMode fetch = FetchMode::FOLLOW_FETCH;

  size_t total_sites = 0;        // pages with at least one kept connection
  size_t total_connections = 0;
  size_t redundant_sites = 0;
  size_t redundant_connections = 0;
  std::map<Cause, CauseTally> per_cause;

  // (k, fraction of sites with >= k redundant connections), k = 0..max.
  std::vector<std::pair<size_t, double>> redundancy_cdf;

  std::vector<IpOriginRow> top_ip_origins;
  std::vector<IssuerRow> cert_issuers;       // issuers of CERT-finding certificates
  std::vector<IssuerRow> issuer_share;       // issuers over all connections
  std::vector<CertDomainRow> cert_domains;
  std::vector<AsnRow> asn_rows;              // present when a mapping was supplied

  SimSummary sim;
  std::optional<double> cred_same_domain_share;  // n/a without CRED findings

  FilterStats filters;
  IngestWarnings warnings;
  size_t port_mismatch_san_matches = 0;
  // Measured-lifetime roll-up (event-log corpora only).
  size_t lifetime_total_sessions = 0;
  size_t lifetime_closed_sessions = 0;
  std::vector<double> closed_lifetime_medians;  // per page, for the summary
};

// Streaming fold over analyzed pages. Pages must share model and fetch
// mode; mixing throws ConfigError.
class CorpusAggregator {
 public:
  explicit CorpusAggregator(std::string corpus_label = "corpus");

  void add_page(const PageAnalysis& page);

  // Builds the report with ranked tables cut to `top_n` rows.
  CorpusReport finalize(size_t top_n = 10, const Ip2Asn* ip2asn = nullptr) const;

  size_t pages_seen() const { return pages_; }

 private:
  std::string corpus_;
  size_t pages_ = 0;
  bool configured_ = false;
  DurationModel model_ = DurationModel::ENDLESS;
  FetchMode fetch_ = FetchMode::FOLLOW_FETCH;

  size_t total_sites_ = 0;
  size_t total_connections_ = 0;
  size_t redundant_sites_ = 0;
  size_t redundant_connections_ = 0;
  std::map<Cause, CauseTally> per_cause_;
  std::map<size_t, size_t> redundant_per_site_;  // redundant count -> #sites

  struct PrevTally {
    size_t connections = 0;
    std::map<std::string, size_t> prev;
  };
  std::map<std::string, PrevTally> ip_by_origin_;

  struct IssuerTally {
    size_t connections = 0;
    std::map<std::string, size_t> domains;
  };
  std::map<std::string, IssuerTally> cert_by_issuer_;
  std::map<std::string, IssuerTally> all_by_issuer_;

  struct DomainTally {
    size_t connections = 0;
    std::map<std::string, size_t> prev;
    std::map<std::string, size_t> issuers;
  };
  std::map<std::string, DomainTally> cert_by_domain_;

  struct EndpointTally {
    size_t connections = 0;
    std::map<std::string, size_t> domains;
  };
  std::map<IpAddress, EndpointTally> ip_by_endpoint_;

  size_t cred_findings_ = 0;
  size_t cred_same_domain_ = 0;

  SimSummary sim_;
  FilterStats filters_;
  IngestWarnings warnings_;
  size_t port_mismatch_ = 0;
  size_t lifetime_total_ = 0;
  size_t lifetime_closed_ = 0;
  std::vector<double> lifetime_medians_;
};

// One-shot fold over a whole corpus.
CorpusReport aggregate_corpus(const std::vector<PageAnalysis>& pages,
                              const std::string& corpus_label = "corpus", size_t top_n = 10,
                              const Ip2Asn* ip2asn = nullptr);

// Standalone table builders over an in-memory corpus.
std::vector<IpOriginRow> top_ip_origins(const std::vector<PageAnalysis>& pages, size_t n);
std::vector<IssuerRow> cert_issuer_table(const std::vector<PageAnalysis>& pages,
                                         IssuerScope scope, size_t n);
std::vector<CertDomainRow> cert_domain_table(const std::vector<PageAnalysis>& pages, size_t n);
std::vector<AsnRow> asn_table(const std::vector<PageAnalysis>& pages, const Ip2Asn& ip2asn,
                              size_t n);
std::optional<double> cred_same_domain_share(const std::vector<PageAnalysis>& pages);

// Restricts both corpora to pages whose normalized URL occurs in both.
// The normalizer strips the scheme, a leading "www." and trailing
// slashes, and lowercases the rest.
std::string normalize_page_url(std::string_view url);
std::pair<std::vector<PageAnalysis>, std::vector<PageAnalysis>> intersect_corpora(
    const std::vector<PageAnalysis>& a, const std::vector<PageAnalysis>& b);

// CSV renderers; each returns the full file content.
std::string table1_csv(const CorpusReport& report);
std::string cdf_csv(const CorpusReport& report);
std::string ip_origins_csv(const CorpusReport& report);
std::string cert_issuers_csv(const CorpusReport& report);
std::string issuer_share_csv(const CorpusReport& report);
std::string cert_domains_csv(const CorpusReport& report);
std::string asn_csv(const CorpusReport& report);
std::string intersect_csv(const CorpusReport& a, const CorpusReport& b);
std::string summary_text(const CorpusReport& report);

// Writes every table of the report into `outdir` using the
// `<corpus>_<model>_<mode>_<table>.csv` naming scheme. Returns the list
// of files written.
std::vector<std::string> write_report_files(const CorpusReport& report,
                                            const std::string& outdir);

}  // namespace h2reuse
