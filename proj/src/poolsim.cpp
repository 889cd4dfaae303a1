#include "h2reuse/poolsim.hpp"

#include <algorithm>

#include "h2reuse/classify.hpp"

namespace h2reuse {

namespace {

struct SimConnection {
  std::string id;
  Endpoint endpoint;
  Certificate certificate;  // the first mapped connection's; reuse never re-handshakes
  std::set<DnsName> excluded;
  CredentialsHint credentials = CredentialsHint::UNKNOWN;
  double close_ms = 0;
};

bool hints_compatible(CredentialsHint a, CredentialsHint b) {
  // `unknown` is compatible with anything.
  return a == CredentialsHint::UNKNOWN || b == CredentialsHint::UNKNOWN || a == b;
}

}  // namespace

SimResult simulate_pool(const SessionTimeline& timeline, const PoolPolicy& policy) {
  if (!policy.reuse_requires_san || !policy.reuse_requires_endpoint)
    throw ConfigError("pool reuse always requires SAN coverage and a matching endpoint");

  std::vector<const ConnectionSession*> order;
  order.reserve(timeline.sessions.size());
  for (const ConnectionSession& s : timeline.sessions) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const ConnectionSession* a, const ConnectionSession* b) {
              return opens_before(*a, *b);
            });

  SimResult result;
  result.observed = order.size();
  std::vector<SimConnection> pool;

  for (const ConnectionSession* observed : order) {
    const DnsName& domain = observed->initial_origin.host;
    SimConnection* target = nullptr;
    for (SimConnection& sim : pool) {
      if (observed->open_ms >= sim.close_ms) continue;  // not live anymore
      if (sim.endpoint != observed->endpoint) continue;
      if (!san_covers(sim.certificate, domain)) continue;
      if (sim.excluded.count(domain) != 0) continue;
      if (policy.credentials_partitioning &&
          !hints_compatible(sim.credentials, observed->credentials()))
        continue;
      target = &sim;
      break;
    }
    if (!target) {
      SimConnection sim;
      sim.id = "p" + std::to_string(result.opened);
      sim.endpoint = observed->endpoint;
      sim.certificate = observed->certificate;
      sim.credentials = observed->credentials();
      sim.close_ms = observed->open_ms;  // extended below
      pool.push_back(std::move(sim));
      target = &pool.back();
      ++result.opened;
    }
    target->close_ms = std::max(target->close_ms, observed->close_ms);
    target->excluded.insert(observed->excluded_domains.begin(),
                            observed->excluded_domains.end());
    if (target->credentials == CredentialsHint::UNKNOWN)
      target->credentials = observed->credentials();
    result.mapping.emplace(observed->conn_id, target->id);
  }
  return result;
}

}  // namespace h2reuse
