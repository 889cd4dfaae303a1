#pragma once

#include <string>
#include <vector>

#include "h2reuse/timeline.hpp"

namespace fixtures {

using namespace h2reuse;

inline Certificate cert(std::string issuer, const std::vector<std::string>& sans) {
  Certificate c;
  c.issuer_org = std::move(issuer);
  for (const std::string& san : sans) {
    auto p = SanPattern::parse(san);
    if (p) c.san_dns_names.push_back(std::move(*p));
  }
  return c;
}

inline ConnectionSession session(std::string id, const std::string& ip, uint16_t port,
                                 const std::string& domain, Certificate certificate,
                                 double open_ms, double close_ms = kOpenForever,
                                 CredentialsHint hint = CredentialsHint::UNKNOWN) {
  ConnectionSession s;
  s.conn_id = std::move(id);
  s.endpoint = Endpoint{IpAddress::parse(ip), port};
  s.initial_origin = Origin{DnsName::parse(domain), port};
  s.certificate = std::move(certificate);
  s.open_ms = open_ms;
  s.close_ms = close_ms;

  RequestEvent req;
  req.request_id = s.conn_id + "_r1";
  req.page_ref = "page_1";
  req.start_ms = open_ms;
  req.duration_ms = 50;
  req.method = "GET";
  req.url = "https://" + domain + "/";
  req.origin = s.initial_origin;
  req.protocol = Protocol::H2;
  req.status = 200;
  req.server_endpoint = s.endpoint;
  req.socket_id = 1;
  req.credentials = hint;
  s.requests.push_back(std::move(req));
  return s;
}

inline SessionTimeline page(std::string url, DurationModel model,
                            std::vector<ConnectionSession> sessions) {
  SessionTimeline t;
  t.page_url = std::move(url);
  t.model = model;
  t.sessions = std::move(sessions);
  std::sort(t.sessions.begin(), t.sessions.end(),
            [](const ConnectionSession& a, const ConnectionSession& b) {
              return opens_before(a, b);
            });
  return t;
}

// Four successively opened same-endpoint connections where #1/#3 share
// certificate A and #2/#4 share certificate B, each certificate
// covering only its own two domains. Expected: #2 {CERT:[s1]},
// #3 {CERT:[s2], CRED:[s1]}, #4 {CERT:[s1,s3], CRED:[s2]}.
inline SessionTimeline worked_example(DurationModel model = DurationModel::ENDLESS) {
  const std::string ip = "203.0.113.10";
  Certificate cert_a = cert("Issuer A", {"one.shard.test", "three.shard.test"});
  Certificate cert_b = cert("Issuer B", {"two.shard.test", "four.shard.test"});
  std::vector<ConnectionSession> sessions;
  sessions.push_back(session("s1", ip, 443, "one.shard.test", cert_a, 0));
  sessions.push_back(session("s2", ip, 443, "two.shard.test", cert_b, 100));
  sessions.push_back(session("s3", ip, 443, "three.shard.test", cert_a, 200));
  sessions.push_back(session("s4", ip, 443, "four.shard.test", cert_b, 300));
  SessionTimeline t = page("https://one.shard.test/", DurationModel::ENDLESS,
                           std::move(sessions));
  if (model == DurationModel::IMMEDIATE) {
    t.model = DurationModel::IMMEDIATE;
    for (ConnectionSession& s : t.sessions) {
      double last = s.open_ms;
      for (const RequestEvent& r : s.requests) last = std::max(last, r.end_ms());
      s.close_ms = last;
    }
  }
  return t;
}

}  // namespace fixtures
