#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "h2reuse/util.hpp"

namespace h2reuse {

// Lowercased, trailing-dot-stripped DNS name split into labels.
// IDNs stay in their punycode (ASCII) form; no Unicode handling.
class DnsName {
 public:
  DnsName() = default;

  // Throws NameFormatError on empty input, illegal characters or
  // oversize labels (>63 octets per label, >253 total).
  static DnsName parse(std::string_view raw);

  const std::vector<std::string>& labels() const { return labels_; }
  bool empty() const { return labels_.empty(); }

  // Dotted lowercase form without trailing dot.
  const std::string& str() const { return text_; }

  bool operator==(const DnsName& other) const { return text_ == other.text_; }
  auto operator<=>(const DnsName& other) const { return text_ <=> other.text_; }

 private:
  std::vector<std::string> labels_;
  std::string text_;
};

enum class IpFamily { V4, V6 };

class IpAddress {
 public:
  IpAddress() = default;

  // Accepts dotted-quad v4 and RFC 4291 v6 text. Throws ParseError otherwise.
  static IpAddress parse(std::string_view text);
  static IpAddress from_bytes(IpFamily family, const uint8_t* data);

  IpFamily family() const { return family_; }
  // 4 bytes for v4, 16 for v6.
  const uint8_t* data() const { return bytes_.data(); }
  size_t size() const { return family_ == IpFamily::V4 ? 4 : 16; }
  const std::string& str() const { return text_; }

  bool operator==(const IpAddress& other) const {
    return family_ == other.family_ &&
           std::equal(bytes_.begin(), bytes_.begin() + size(), other.bytes_.begin());
  }
  auto operator<=>(const IpAddress& other) const {
    if (auto c = family_ <=> other.family_; c != 0) return c;
    for (size_t i = 0; i < size(); ++i)
      if (auto c = bytes_[i] <=> other.bytes_[i]; c != 0) return c;
    return std::strong_ordering::equal;
  }

 private:
  IpFamily family_ = IpFamily::V4;
  std::array<uint8_t, 16> bytes_{};
  std::string text_;  // canonical presentation form
};

// Destination of a connection. Equality is exact (ip, port) equality.
struct Endpoint {
  IpAddress ip;
  uint16_t port = 0;

  // "ip:port" text, v6 bracketed. parse() accepts the same shape.
  std::string str() const;
  static Endpoint parse(std::string_view text);

  bool operator==(const Endpoint& other) const = default;
  auto operator<=>(const Endpoint& other) const = default;
};

// An https origin. Only https origins enter classification; the scheme
// is implied and not stored.
struct Origin {
  DnsName host;
  uint16_t port = 443;

  std::string str() const;  // "host:port"

  bool operator==(const Origin& other) const = default;
  auto operator<=>(const Origin& other) const = default;
};

// Parses an absolute URL into an Origin. Port defaults to 443.
// Throws UnsupportedSchemeError for non-https schemes, UrlError/
// NameFormatError for hosts we cannot represent.
Origin origin_of(std::string_view url);

// One SAN entry: a literal name or a single leading wildcard label.
struct SanPattern {
  bool wildcard = false;
  DnsName base;  // the part after "*." for wildcards, the whole name otherwise

  std::string str() const { return wildcard ? "*." + base.str() : base.str(); }

  // Returns nullopt for entries we ignore (IP SANs, malformed names,
  // wildcards not forming the entire leftmost label).
  static std::optional<SanPattern> parse(std::string_view raw);

  bool operator==(const SanPattern& other) const = default;
};

struct Certificate {
  std::string issuer_org;
  std::optional<std::string> subject_cn;
  std::vector<SanPattern> san_dns_names;

  bool operator==(const Certificate& other) const = default;
};

enum class Protocol { H1, H2, H3, OTHER };

enum class CredentialsHint { INCLUDED, OMITTED, UNKNOWN };

struct RequestEvent {
  std::string request_id;
  std::string page_ref;
  double start_ms = 0;     // since page navigation start
  double duration_ms = 0;  // total entry duration
  std::string method;
  std::string url;
  std::optional<Origin> origin;  // parsed https origin when the URL has one
  Protocol protocol = Protocol::OTHER;
  int status = 0;
  std::optional<Endpoint> server_endpoint;
  uint64_t socket_id = 0;
  CredentialsHint credentials = CredentialsHint::UNKNOWN;

  double end_ms() const { return start_ms + duration_ms; }
};

using ConnId = std::string;

// Sentinel close time for connections never observed to close.
// Orders after every finite time.
inline constexpr double kOpenForever = std::numeric_limits<double>::infinity();

// A reconstructed HTTP/2 connection with its open interval
// [open_ms, close_ms) and the requests it carried.
struct ConnectionSession {
  ConnId conn_id;
  Endpoint endpoint;
  Origin initial_origin;
  Certificate certificate;
  double open_ms = 0;
  double close_ms = kOpenForever;
  std::vector<RequestEvent> requests;          // sorted by start time
  std::set<DnsName> excluded_domains;          // 421 responses seen here

  // The session-level credentials mode: the first request's hint.
  // HAR-derived sessions always report UNKNOWN.
  CredentialsHint credentials() const {
    return requests.empty() ? CredentialsHint::UNKNOWN : requests.front().credentials;
  }

  // True while [open_ms, close_ms) contains t.
  bool open_at(double t) const { return open_ms <= t && t < close_ms; }
};

// Strict (open_ms, conn_id) order used everywhere a total session order
// is needed; ties on open time break by id so sweeps are deterministic.
inline bool opens_before(const ConnectionSession& a, const ConnectionSession& b) {
  if (a.open_ms != b.open_ms) return a.open_ms < b.open_ms;
  return a.conn_id < b.conn_id;
}

enum class Cause { CERT, IP, CRED };

const char* cause_name(Cause c);
std::optional<Cause> cause_from_name(std::string_view name);
inline constexpr std::array<Cause, 3> kAllCauses{Cause::CERT, Cause::IP, Cause::CRED};

// Redundancy verdict for one connection. Exists only when at least one
// witness was found; the unknown-third-party case has no Finding.
struct Finding {
  ConnId conn_id;
  // Each cause appears at most once, with every witness that supplied it.
  std::map<Cause, std::vector<ConnId>> causes;
  // Initial origin of the earliest witness per cause.
  std::map<Cause, Origin> prev_origin_per_cause;
  // Witness pairs where the same-initial-domain CRED rule suppressed an
  // otherwise valid IP attribution; surfaced for inspection.
  std::vector<ConnId> dual_role_witnesses;

  bool has_cause(Cause c) const { return causes.count(c) != 0; }
};

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::H1: return "h1";
    case Protocol::H2: return "h2";
    case Protocol::H3: return "h3";
    default: return "other";
  }
}

inline const char* credentials_name(CredentialsHint h) {
  switch (h) {
    case CredentialsHint::INCLUDED: return "included";
    case CredentialsHint::OMITTED: return "omitted";
    default: return "unknown";
  }
}

// Normalizes a raw hostname: lowercase, trailing dot stripped, split
// into labels. Idempotent. Throws NameFormatError on bad input.
inline DnsName normalize_dns_name(std::string_view raw) { return DnsName::parse(raw); }

}  // namespace h2reuse
