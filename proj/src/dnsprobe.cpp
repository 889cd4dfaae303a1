#include "h2reuse/dnsprobe.hpp"

#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <random>
#include <sstream>

#include <json.hpp>

#include "h2reuse/dnswire.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace h2reuse {

using nlohmann::json;

std::vector<ResolverSpec> load_resolver_list(const std::string& path) {
  return parse_resolver_list(read_file(path), path);
}

std::vector<ResolverSpec> parse_resolver_list(std::string_view content,
                                              const std::string& source) {
  std::vector<ResolverSpec> out;
  std::set<std::string> seen;
  size_t line_no = 0;
  for (const std::string& raw : split(content, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() < 2)
      throw LoadError(source + ":" + std::to_string(line_no) + ": expected ip<TAB>label");
    ResolverSpec spec;
    try {
      spec.address = IpAddress::parse(trim(fields[0]));
    } catch (const ParseError&) {
      throw LoadError(source + ":" + std::to_string(line_no) + ": unparseable resolver address");
    }
    if (!seen.insert(spec.address.str()).second)
      throw LoadError(source + ":" + std::to_string(line_no) + ": duplicate resolver address");
    spec.label = std::string(trim(fields[1]));
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<DnsName> load_domain_list(const std::string& path) {
  return parse_domain_list(read_file(path), path);
}

std::vector<DnsName> parse_domain_list(std::string_view content, const std::string& source) {
  std::vector<DnsName> out;
  size_t line_no = 0;
  for (const std::string& raw : split(content, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    try {
      out.push_back(DnsName::parse(line));
    } catch (const NameFormatError& e) {
      throw LoadError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ResolutionSnapshot probe_round(const ProbePlan& plan, const DnsClient& client,
                               int64_t timeslot_unix_ms) {
  ResolutionSnapshot snapshot;
  snapshot.timeslot_unix_ms = timeslot_unix_ms;
  snapshot.cells.assign(plan.resolvers.size(), std::vector<Cell>(plan.domains.size()));

  const int64_t total = static_cast<int64_t>(plan.resolvers.size() * plan.domains.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < total; ++i) {
    size_t r = static_cast<size_t>(i) / plan.domains.size();
    size_t d = static_cast<size_t>(i) % plan.domains.size();
    snapshot.cells[r][d] = client(plan.resolvers[r], plan.domains[d]);
  }
  return snapshot;
}

namespace {

size_t index_of_domain(const ProbePlan& plan, const DnsName& domain) {
  for (size_t i = 0; i < plan.domains.size(); ++i)
    if (plan.domains[i] == domain) return i;
  throw Error("domain not part of the probe plan: " + domain.str());
}

bool sets_intersect(const AnswerSet& a, const AnswerSet& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib)
      ++ia;
    else
      ++ib;
  }
  return false;
}

}  // namespace

OverlapSeries overlap_series(const ProbePlan& plan,
                             const std::vector<ResolutionSnapshot>& snapshots,
                             const DnsName& domain_a, const DnsName& domain_b) {
  size_t ia = index_of_domain(plan, domain_a);
  size_t ib = index_of_domain(plan, domain_b);

  OverlapSeries series;
  series.domain_a = domain_a;
  series.domain_b = domain_b;
  for (const ResolutionSnapshot& snapshot : snapshots) {
    if (!snapshot.complete()) {
      ++series.skipped_slots;
      continue;
    }
    int overlap = 0;
    for (size_t r = 0; r < plan.resolvers.size(); ++r)
      if (sets_intersect(*snapshot.cells[r][ia], *snapshot.cells[r][ib])) ++overlap;
    series.points.emplace_back(snapshot.timeslot_unix_ms, overlap);
  }
  return series;
}

WireDnsClient::WireDnsClient(std::chrono::milliseconds timeout, bool ecs_probe)
    : timeout_(timeout), ecs_probe_(ecs_probe) {}

namespace {

// Sends one datagram and waits for a matching-id reply.
std::optional<std::vector<uint8_t>> udp_exchange(const IpAddress& server,
                                                 const std::vector<uint8_t>& query,
                                                 std::chrono::milliseconds timeout) {
  int family = server.family() == IpFamily::V4 ? AF_INET : AF_INET6;
  int fd = ::socket(family, SOCK_DGRAM, 0);
  if (fd < 0) return std::nullopt;

  sockaddr_storage addr{};
  socklen_t addr_len = 0;
  if (family == AF_INET) {
    auto* a4 = reinterpret_cast<sockaddr_in*>(&addr);
    a4->sin_family = AF_INET;
    a4->sin_port = htons(53);
    std::memcpy(&a4->sin_addr, server.data(), 4);
    addr_len = sizeof(sockaddr_in);
  } else {
    auto* a6 = reinterpret_cast<sockaddr_in6*>(&addr);
    a6->sin6_family = AF_INET6;
    a6->sin6_port = htons(53);
    std::memcpy(&a6->sin6_addr, server.data(), 16);
    addr_len = sizeof(sockaddr_in6);
  }

  std::optional<std::vector<uint8_t>> result;
  if (::sendto(fd, query.data(), query.size(), 0, reinterpret_cast<sockaddr*>(&addr),
               addr_len) == static_cast<ssize_t>(query.size())) {
    pollfd pfd{fd, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(timeout.count())) > 0) {
      std::vector<uint8_t> buf(4096);
      ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), 0, nullptr, nullptr);
      if (n > 0) {
        buf.resize(static_cast<size_t>(n));
        result = std::move(buf);
      }
    }
  }
  ::close(fd);
  return result;
}

std::optional<std::vector<uint8_t>> tcp_exchange(const IpAddress& server,
                                                 const std::vector<uint8_t>& query,
                                                 std::chrono::milliseconds timeout) {
  int family = server.family() == IpFamily::V4 ? AF_INET : AF_INET6;
  int fd = ::socket(family, SOCK_STREAM, 0);
  if (fd < 0) return std::nullopt;

  timeval tv{};
  tv.tv_sec = timeout.count() / 1000;
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));

  sockaddr_storage addr{};
  socklen_t addr_len = 0;
  if (family == AF_INET) {
    auto* a4 = reinterpret_cast<sockaddr_in*>(&addr);
    a4->sin_family = AF_INET;
    a4->sin_port = htons(53);
    std::memcpy(&a4->sin_addr, server.data(), 4);
    addr_len = sizeof(sockaddr_in);
  } else {
    auto* a6 = reinterpret_cast<sockaddr_in6*>(&addr);
    a6->sin6_family = AF_INET6;
    a6->sin6_port = htons(53);
    std::memcpy(&a6->sin6_addr, server.data(), 16);
    addr_len = sizeof(sockaddr_in6);
  }

  std::optional<std::vector<uint8_t>> result;
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), addr_len) == 0) {
    std::vector<uint8_t> framed;
    framed.push_back(static_cast<uint8_t>(query.size() >> 8));
    framed.push_back(static_cast<uint8_t>(query.size() & 0xff));
    framed.insert(framed.end(), query.begin(), query.end());
    if (::send(fd, framed.data(), framed.size(), 0) == static_cast<ssize_t>(framed.size())) {
      auto read_exact = [&](uint8_t* out, size_t n) {
        size_t got = 0;
        while (got < n) {
          ssize_t r = ::recv(fd, out + got, n - got, 0);
          if (r <= 0) return false;
          got += static_cast<size_t>(r);
        }
        return true;
      };
      uint8_t len_buf[2];
      if (read_exact(len_buf, 2)) {
        size_t len = static_cast<size_t>(len_buf[0]) << 8 | len_buf[1];
        std::vector<uint8_t> buf(len);
        if (len > 0 && read_exact(buf.data(), len)) result = std::move(buf);
      }
    }
  }
  ::close(fd);
  return result;
}

}  // namespace

Cell WireDnsClient::operator()(const ResolverSpec& resolver, const DnsName& domain) const {
  thread_local std::mt19937 rng{std::random_device{}()};
  AnswerSet answers;
  bool any_ok = false;

  for (DnsType qtype : {DnsType::A, DnsType::AAAA}) {
    uint16_t id = static_cast<uint16_t>(rng());
    std::vector<uint8_t> query = encode_dns_query(id, domain, qtype, ecs_probe_);
    std::optional<std::vector<uint8_t>> raw = udp_exchange(resolver.address, query, timeout_);
    DnsResponse resp;
    bool ok = false;
    if (raw) {
      try {
        resp = decode_dns_response(*raw);
        ok = resp.id == id;
        if (ok && resp.truncated) {
          raw = tcp_exchange(resolver.address, query, timeout_);
          ok = false;
          if (raw) {
            resp = decode_dns_response(*raw);
            ok = resp.id == id;
          }
        }
      } catch (const ParseError&) {
        ok = false;
      }
    }
    if (!ok || resp.rcode != 0) continue;
    any_ok = true;
    if (resp.saw_ecs_option) ecs_seen_.insert(resolver.address.str());
    for (const IpAddress& ip : resp.addresses) answers.insert(ip);
  }

  if (!any_ok || answers.empty()) return std::nullopt;
  return answers;
}

ScriptedDnsClient ScriptedDnsClient::load_file(const std::string& path) {
  return parse(read_file(path));
}

ScriptedDnsClient ScriptedDnsClient::parse(std::string_view content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("bad scripted-resolver fixture: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("slots") || !doc["slots"].is_array())
    throw ParseError("scripted-resolver fixture needs a slots array");

  ScriptedDnsClient client;
  for (const json& slot : doc["slots"]) {
    SlotMap map;
    if (const json* answers = slot.is_object() && slot.contains("answers")
                                  ? &slot["answers"]
                                  : nullptr) {
      for (auto r = answers->begin(); r != answers->end(); ++r) {
        for (auto d = r.value().begin(); d != r.value().end(); ++d) {
          Cell cell;
          if (d.value().is_array()) {
            AnswerSet set;
            for (const json& ip : d.value()) set.insert(IpAddress::parse(ip.get<std::string>()));
            cell = std::move(set);
          }  // "FAILED" or anything else stays empty
          map[r.key()][to_lower_ascii(d.key())] = std::move(cell);
        }
      }
    }
    client.slots_.push_back(std::move(map));
  }
  return client;
}

Cell ScriptedDnsClient::operator()(const ResolverSpec& resolver, const DnsName& domain) const {
  if (slot_ >= slots_.size()) return std::nullopt;
  const SlotMap& map = slots_[slot_];
  auto r = map.find(resolver.address.str());
  if (r == map.end()) return std::nullopt;
  auto d = r->second.find(domain.str());
  if (d == r->second.end()) return std::nullopt;
  return d->second;
}

std::string snapshot_to_json_line(const ProbePlan& plan, const ResolutionSnapshot& snapshot) {
  json answers = json::object();
  for (size_t r = 0; r < plan.resolvers.size(); ++r) {
    json per_domain = json::object();
    for (size_t d = 0; d < plan.domains.size(); ++d) {
      const Cell& cell = snapshot.cells[r][d];
      if (!cell) {
        per_domain[plan.domains[d].str()] = "FAILED";
      } else {
        json ips = json::array();
        for (const IpAddress& ip : *cell) ips.push_back(ip.str());
        per_domain[plan.domains[d].str()] = std::move(ips);
      }
    }
    answers[plan.resolvers[r].address.str()] = std::move(per_domain);
  }
  json line{{"timeslot_ms", snapshot.timeslot_unix_ms}, {"answers", std::move(answers)}};
  return line.dump() + "\n";
}

ResolutionSnapshot snapshot_from_json_line(const ProbePlan& plan, std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("bad snapshot line: ") + e.what());
  }
  ResolutionSnapshot snapshot;
  snapshot.timeslot_unix_ms = j.value("timeslot_ms", int64_t{0});
  snapshot.cells.assign(plan.resolvers.size(), std::vector<Cell>(plan.domains.size()));
  const json& answers = j.at("answers");
  for (size_t r = 0; r < plan.resolvers.size(); ++r) {
    auto rit = answers.find(plan.resolvers[r].address.str());
    if (rit == answers.end()) continue;
    for (size_t d = 0; d < plan.domains.size(); ++d) {
      auto dit = rit->find(plan.domains[d].str());
      if (dit == rit->end() || !dit->is_array()) continue;
      AnswerSet set;
      for (const json& ip : *dit) set.insert(IpAddress::parse(ip.get<std::string>()));
      snapshot.cells[r][d] = std::move(set);
    }
  }
  return snapshot;
}

std::string overlap_csv(const OverlapSeries& series) {
  std::ostringstream out;
  out << "timeslot_ms,overlapping_resolvers\n";
  for (const auto& [slot, count] : series.points) out << slot << "," << count << "\n";
  return std::move(out).str();
}

}  // namespace h2reuse
