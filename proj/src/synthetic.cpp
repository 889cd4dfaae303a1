#include "h2reuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "h2reuse/classify.hpp"

namespace h2reuse::synthetic {

using nlohmann::json;

namespace {

constexpr const char* kFamilies[] = {"alpha.test", "beta.test", "gamma.test", "delta.test"};
constexpr const char* kSubLabels[] = {"www", "img", "static", "api", "cdn"};
constexpr const char* kIssuers[] = {"Encrypt-o-matic", "Trusty Services", "CertCert Inc",
                                    "Budget Certs Ltd"};

size_t pick(std::mt19937& rng, size_t n) {
  return std::uniform_int_distribution<size_t>(0, n - 1)(rng);
}

double pick_ms(std::mt19937& rng, double lo, double hi) {
  return std::floor(std::uniform_real_distribution<double>(lo, hi)(rng));
}

bool chance(std::mt19937& rng, double p) {
  return std::uniform_real_distribution<double>(0, 1)(rng) < p;
}

DnsName sub_domain(size_t family, size_t sub) {
  return DnsName::parse(std::string(kSubLabels[sub]) + "." + kFamilies[family]);
}

// Every family owns two addresses; two extra addresses are shared by
// all families so cross-family endpoint collisions happen.
IpAddress family_ip(std::mt19937& rng, size_t family) {
  char buf[32];
  if (chance(rng, 0.25))
    std::snprintf(buf, sizeof(buf), "198.51.100.%zu", 200 + pick(rng, 2));
  else
    std::snprintf(buf, sizeof(buf), "198.51.100.%zu", family * 10 + pick(rng, 2));
  return IpAddress::parse(buf);
}

Certificate make_cert(std::mt19937& rng, size_t family, const DnsName& own_domain) {
  Certificate cert;
  cert.issuer_org = kIssuers[pick(rng, std::size(kIssuers))];
  double roll = std::uniform_real_distribution<double>(0, 1)(rng);
  if (roll < 0.5) {
    // Site-wide certificate.
    cert.san_dns_names.push_back(*SanPattern::parse(kFamilies[family]));
    cert.san_dns_names.push_back(*SanPattern::parse("*." + std::string(kFamilies[family])));
  } else if (roll < 0.85) {
    // Narrow certificate: the connection's own name only.
    cert.san_dns_names.push_back(*SanPattern::parse(own_domain.str()));
  } else {
    // Broad certificate spanning two families.
    size_t other = (family + 1 + pick(rng, std::size(kFamilies) - 1)) % std::size(kFamilies);
    cert.san_dns_names.push_back(*SanPattern::parse("*." + std::string(kFamilies[family])));
    cert.san_dns_names.push_back(*SanPattern::parse("*." + std::string(kFamilies[other])));
    cert.san_dns_names.push_back(*SanPattern::parse(kFamilies[family]));
  }
  // A real server's certificate covers the name it was contacted under.
  if (!san_covers(cert, own_domain))
    cert.san_dns_names.push_back(*SanPattern::parse(own_domain.str()));
  return cert;
}

}  // namespace

SessionTimeline make_page(std::mt19937& rng, const Options& options,
                          const std::string& page_url) {
  SessionTimeline page;
  page.page_url = page_url;
  page.model = DurationModel::ENDLESS;

  size_t count = 1 + pick(rng, options.max_connections);
  for (size_t i = 0; i < count; ++i) {
    size_t family = pick(rng, std::size(kFamilies));
    DnsName domain = chance(rng, 0.25) ? DnsName::parse(kFamilies[family])
                                       : sub_domain(family, pick(rng, std::size(kSubLabels)));

    ConnectionSession session;
    session.conn_id = "s" + std::to_string(i + 1);
    session.endpoint = Endpoint{family_ip(rng, family), 443};
    session.initial_origin = Origin{domain, 443};
    session.certificate = make_cert(rng, family, domain);
    session.open_ms = pick_ms(rng, 0, 2000);
    session.close_ms = kOpenForever;

    CredentialsHint hint = CredentialsHint::UNKNOWN;
    if (options.with_credentials)
      hint = chance(rng, 0.5) ? CredentialsHint::INCLUDED : CredentialsHint::OMITTED;

    size_t request_count = 1 + pick(rng, 3);
    for (size_t r = 0; r < request_count; ++r) {
      RequestEvent req;
      req.request_id = "r" + std::to_string(i + 1) + "_" + std::to_string(r + 1);
      req.page_ref = "page_1";
      req.start_ms = r == 0 ? session.open_ms : session.open_ms + pick_ms(rng, 1, 400);
      req.duration_ms = pick_ms(rng, 10, 400);
      req.method = "GET";
      req.url = "https://" + domain.str() + "/asset" + std::to_string(r) + ".js";
      req.origin = Origin{domain, 443};
      req.protocol = Protocol::H2;
      req.status = 200;
      req.server_endpoint = session.endpoint;
      req.socket_id = i + 1;
      req.credentials = hint;
      session.requests.push_back(std::move(req));
    }
    if (options.with_421 && chance(rng, 0.1)) {
      size_t other_family = pick(rng, std::size(kFamilies));
      DnsName refused = sub_domain(other_family, pick(rng, std::size(kSubLabels)));
      RequestEvent req = session.requests.back();
      req.request_id += "x";
      req.start_ms = session.open_ms + pick_ms(rng, 1, 300);
      req.url = "https://" + refused.str() + "/refused";
      req.origin = Origin{refused, 443};
      req.status = 421;
      session.excluded_domains.insert(refused);
      session.requests.push_back(std::move(req));
    }
    std::sort(session.requests.begin(), session.requests.end(),
              [](const RequestEvent& a, const RequestEvent& b) {
                if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
                return a.request_id < b.request_id;
              });
    page.sessions.push_back(std::move(session));
  }

  std::sort(page.sessions.begin(), page.sessions.end(),
            [](const ConnectionSession& a, const ConnectionSession& b) {
              return opens_before(a, b);
            });
  return page;
}

SessionTimeline with_model(const SessionTimeline& page, DurationModel model) {
  SessionTimeline out = page;
  out.model = model;
  for (ConnectionSession& session : out.sessions) {
    if (model == DurationModel::ENDLESS) {
      session.close_ms = kOpenForever;
    } else {
      double last_end = session.open_ms;
      for (const RequestEvent& req : session.requests)
        last_end = std::max(last_end, req.end_ms());
      session.close_ms = last_end;
    }
  }
  return out;
}

std::string to_har(const SessionTimeline& page) {
  // Wall-clock base 2021-04-20T12:00; entry times are offsets from it.
  auto stamp = [](double ms) {
    int64_t whole = static_cast<int64_t>(ms);
    int64_t minutes = whole / 60000;
    int64_t secs = (whole / 1000) % 60;
    int64_t frac = whole % 1000;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "2021-04-20T12:%02lld:%02lld.%03lldZ",
                  static_cast<long long>(minutes), static_cast<long long>(secs),
                  static_cast<long long>(frac));
    return std::string(buf);
  };

  json entries = json::array();
  for (const ConnectionSession& session : page.sessions) {
    for (const RequestEvent& req : session.requests) {
      json san_list = json::array();
      for (const SanPattern& p : session.certificate.san_dns_names) san_list.push_back(p.str());
      json entry{
          {"_request_id", req.request_id},
          {"pageref", "page_1"},
          {"startedDateTime", stamp(req.start_ms)},
          {"time", req.duration_ms},
          {"request", json{{"method", req.method}, {"url", req.url}, {"httpVersion", "h2"}}},
          {"response",
           json{{"status", req.status},
                {"httpVersion", "h2"},
                {"_securityDetails", json{{"issuer", session.certificate.issuer_org},
                                          {"sanList", std::move(san_list)}}}}},
          {"serverIPAddress", session.endpoint.ip.str()},
          {"connection", std::to_string(req.socket_id)},
      };
      entries.push_back(std::move(entry));
    }
  }

  json doc{{"log",
            json{{"version", "1.2"},
                 {"creator", json{{"name", "synthetic"}, {"version", "1"}}},
                 {"pages", json::array({json{{"id", "page_1"},
                                             {"startedDateTime", stamp(0)},
                                             {"title", page.page_url}}})},
                 {"entries", std::move(entries)}}}};
  return doc.dump(2);
}

}  // namespace h2reuse::synthetic
