#include "h2reuse/classify.hpp"

#include <algorithm>

namespace h2reuse {

const char* reuse_verdict_name(ReuseVerdict v) {
  switch (v) {
    case ReuseVerdict::REUSABLE: return "REUSABLE";
    case ReuseVerdict::IP_MISMATCH: return "IP_MISMATCH";
    case ReuseVerdict::CERT_MISMATCH: return "CERT_MISMATCH";
    case ReuseVerdict::EXCLUDED_421: return "EXCLUDED_421";
  }
  return "?";
}

const char* fetch_mode_name(FetchMode m) {
  return m == FetchMode::FOLLOW_FETCH ? "follow" : "ignore";
}

std::optional<FetchMode> fetch_mode_from_name(std::string_view name) {
  if (name == "follow") return FetchMode::FOLLOW_FETCH;
  if (name == "ignore") return FetchMode::IGNORE_FETCH;
  return std::nullopt;
}

bool san_covers(const Certificate& cert, const DnsName& domain) {
  const auto& dl = domain.labels();
  for (const SanPattern& p : cert.san_dns_names) {
    if (!p.wildcard) {
      if (p.base == domain) return true;
      continue;
    }
    const auto& bl = p.base.labels();
    if (dl.size() == bl.size() + 1 && std::equal(bl.begin(), bl.end(), dl.begin() + 1))
      return true;
  }
  return false;
}

ReuseVerdict reuse_verdict(const ConnectionSession& existing, const Origin& target,
                           const Endpoint& target_endpoint) {
  if (existing.excluded_domains.count(target.host) != 0) return ReuseVerdict::EXCLUDED_421;
  if (!san_covers(existing.certificate, target.host)) return ReuseVerdict::CERT_MISMATCH;
  if (existing.endpoint != target_endpoint) return ReuseVerdict::IP_MISMATCH;
  return ReuseVerdict::REUSABLE;
}

namespace {

// A CRED attribution needs supporting hint evidence under IGNORE_FETCH:
// with hints on both sides it holds only when they differ, and without
// hints the connection is assumed coalesced in that counterfactual.
bool cred_applies(FetchMode mode, const ConnectionSession& subject,
                  const ConnectionSession& witness) {
  if (mode == FetchMode::FOLLOW_FETCH) return true;
  CredentialsHint s = subject.credentials();
  CredentialsHint w = witness.credentials();
  if (s == CredentialsHint::UNKNOWN || w == CredentialsHint::UNKNOWN) return false;
  return s != w;
}

}  // namespace

std::optional<Finding> classify_connection(const ConnectionSession& subject,
                                           const std::vector<const ConnectionSession*>& prior_open,
                                           FetchMode mode, ClassifyDiagnostics* diag) {
  const DnsName& domain = subject.initial_origin.host;
  Finding finding;
  finding.conn_id = subject.conn_id;
  // Earliest witness per cause, for the prev-origin column.
  std::map<Cause, const ConnectionSession*> earliest;

  for (const ConnectionSession* prior : prior_open) {
    const ConnectionSession& p = *prior;
    if (!opens_before(p, subject) || subject.open_ms >= p.close_ms)
      throw InternalError("prior_open contains a session not open at the subject's start");

    std::optional<Cause> role;
    bool same_endpoint = p.endpoint == subject.endpoint;
    bool covers = san_covers(p.certificate, domain);
    bool excluded = p.excluded_domains.count(domain) != 0;

    if (p.initial_origin.host == domain && !same_endpoint) {
      // Same initial domain on a different IP: reuse was possible in
      // principle, so only credentials partitioning plus multi-IP DNS
      // explains the extra connection.
      if (cred_applies(mode, subject, p)) {
        role = Cause::CRED;
        if (covers && !excluded && p.endpoint.port == subject.endpoint.port)
          finding.dual_role_witnesses.push_back(p.conn_id);
      }
    } else if (same_endpoint && covers && !excluded) {
      // Reuse conditions fully met yet a new connection exists: the
      // credentials-partitioning residual.
      if (cred_applies(mode, subject, p)) role = Cause::CRED;
    } else if (same_endpoint && !covers) {
      role = Cause::CERT;
    } else if (!same_endpoint && covers && !excluded) {
      if (p.endpoint.port == subject.endpoint.port) {
        role = Cause::IP;
      } else if (diag) {
        ++diag->port_mismatch_san_matches;
      }
    }

    if (role) {
      finding.causes[*role].push_back(p.conn_id);
      auto it = earliest.find(*role);
      if (it == earliest.end() || opens_before(p, *it->second)) earliest[*role] = prior;
    }
  }

  if (finding.causes.empty()) return std::nullopt;
  for (const auto& [cause, session] : earliest)
    finding.prev_origin_per_cause.emplace(cause, session->initial_origin);
  return finding;
}

PageFindings analyze_page(const SessionTimeline& timeline, FetchMode mode) {
  PageFindings out;
  out.page_url = timeline.page_url;
  out.total_h2_connections = timeline.sessions.size();

  std::vector<const ConnectionSession*> order;
  order.reserve(timeline.sessions.size());
  for (const ConnectionSession& s : timeline.sessions) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const ConnectionSession* a, const ConnectionSession* b) {
              return opens_before(*a, *b);
            });

  std::vector<const ConnectionSession*> open;
  for (const ConnectionSession* subject : order) {
    std::erase_if(open, [&](const ConnectionSession* p) {
      return p->close_ms <= subject->open_ms;
    });
    if (auto finding = classify_connection(*subject, open, mode, &out.diagnostics)) {
      for (const auto& [cause, witnesses] : finding->causes) ++out.cause_connections[cause];
      out.findings.push_back(std::move(*finding));
      ++out.redundant;
    }
    open.push_back(subject);
  }
  return out;
}

}  // namespace h2reuse
