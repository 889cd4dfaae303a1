#include "h2reuse/model.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstring>

namespace h2reuse {

namespace {

bool legal_label_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
}

}  // namespace

DnsName DnsName::parse(std::string_view raw) {
  if (raw.empty()) throw NameFormatError("empty DNS name");
  std::string lowered = to_lower_ascii(raw);
  if (!lowered.empty() && lowered.back() == '.') lowered.pop_back();
  if (lowered.empty()) throw NameFormatError("DNS name is only a dot");
  if (lowered.size() > 253)
    throw NameFormatError("DNS name exceeds 253 octets: " + lowered);

  DnsName name;
  name.labels_ = split(lowered, '.');
  for (const std::string& label : name.labels_) {
    if (label.empty()) throw NameFormatError("empty label in DNS name: " + lowered);
    if (label.size() > 63)
      throw NameFormatError("label exceeds 63 octets in: " + lowered);
    for (char c : label)
      if (!legal_label_char(c))
        throw NameFormatError("illegal character in DNS name: " + lowered);
  }
  name.text_ = std::move(lowered);
  return name;
}

IpAddress IpAddress::parse(std::string_view text) {
  std::string s(text);
  IpAddress ip;
  uint8_t buf[16];
  if (inet_pton(AF_INET, s.c_str(), buf) == 1) {
    ip.family_ = IpFamily::V4;
    std::memcpy(ip.bytes_.data(), buf, 4);
  } else if (inet_pton(AF_INET6, s.c_str(), buf) == 1) {
    ip.family_ = IpFamily::V6;
    std::memcpy(ip.bytes_.data(), buf, 16);
  } else {
    throw ParseError("not an IP address: '" + s + "'");
  }
  char out[INET6_ADDRSTRLEN];
  inet_ntop(ip.family_ == IpFamily::V4 ? AF_INET : AF_INET6, ip.bytes_.data(), out, sizeof(out));
  ip.text_ = out;
  return ip;
}

IpAddress IpAddress::from_bytes(IpFamily family, const uint8_t* data) {
  IpAddress ip;
  ip.family_ = family;
  std::memcpy(ip.bytes_.data(), data, family == IpFamily::V4 ? 4 : 16);
  char out[INET6_ADDRSTRLEN];
  inet_ntop(family == IpFamily::V4 ? AF_INET : AF_INET6, ip.bytes_.data(), out, sizeof(out));
  ip.text_ = out;
  return ip;
}

std::string Endpoint::str() const {
  if (ip.family() == IpFamily::V6) return "[" + ip.str() + "]:" + std::to_string(port);
  return ip.str() + ":" + std::to_string(port);
}

Endpoint Endpoint::parse(std::string_view text) {
  std::string_view host;
  std::string_view port_part;
  if (!text.empty() && text.front() == '[') {
    size_t close = text.find(']');
    if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':')
      throw ParseError("bad endpoint: '" + std::string(text) + "'");
    host = text.substr(1, close - 1);
    port_part = text.substr(close + 2);
  } else {
    size_t colon = text.rfind(':');
    if (colon == std::string_view::npos)
      throw ParseError("endpoint missing port: '" + std::string(text) + "'");
    host = text.substr(0, colon);
    port_part = text.substr(colon + 1);
  }
  int port = 0;
  for (char c : port_part) {
    if (c < '0' || c > '9') throw ParseError("bad port in endpoint: '" + std::string(text) + "'");
    port = port * 10 + (c - '0');
    if (port > 65535) throw ParseError("port out of range: '" + std::string(text) + "'");
  }
  if (port == 0) throw ParseError("port out of range: '" + std::string(text) + "'");
  return Endpoint{IpAddress::parse(host), static_cast<uint16_t>(port)};
}

std::string Origin::str() const { return host.str() + ":" + std::to_string(port); }

Origin origin_of(std::string_view url) {
  size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw UrlError("not an absolute URL: '" + std::string(url) + "'");
  std::string scheme = to_lower_ascii(url.substr(0, scheme_end));
  if (scheme != "https")
    throw UnsupportedSchemeError("unsupported scheme '" + scheme + "' in: " + std::string(url));

  std::string_view rest = url.substr(scheme_end + 3);
  size_t auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  if (size_t at = authority.rfind('@'); at != std::string_view::npos)
    authority = authority.substr(at + 1);
  if (authority.empty()) throw UrlError("URL has no host: '" + std::string(url) + "'");

  std::string_view host = authority;
  uint16_t port = 443;
  if (authority.front() == '[') {
    // v6-literal hosts are not representable as DnsNames.
    throw NameFormatError("IP-literal host not supported: '" + std::string(url) + "'");
  }
  if (size_t colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    std::string_view p = authority.substr(colon + 1);
    if (p.empty()) throw UrlError("empty port in URL: '" + std::string(url) + "'");
    int v = 0;
    for (char c : p) {
      if (c < '0' || c > '9') throw UrlError("bad port in URL: '" + std::string(url) + "'");
      v = v * 10 + (c - '0');
      if (v > 65535) throw UrlError("port out of range in URL: '" + std::string(url) + "'");
    }
    if (v == 0) throw UrlError("port out of range in URL: '" + std::string(url) + "'");
    port = static_cast<uint16_t>(v);
  }
  return Origin{DnsName::parse(host), port};
}

std::optional<SanPattern> SanPattern::parse(std::string_view raw) {
  std::string_view s = trim(raw);
  if (s.empty()) return std::nullopt;
  bool wildcard = false;
  if (s.size() >= 2 && s[0] == '*' && s[1] == '.') {
    wildcard = true;
    s = s.substr(2);
  }
  if (s.find('*') != std::string_view::npos) return std::nullopt;  // embedded wildcard
  try {
    DnsName base = DnsName::parse(s);
    // IP-shaped SANs carry no DNS meaning for reuse; callers count them.
    try {
      IpAddress::parse(base.str());
      return std::nullopt;
    } catch (const ParseError&) {
    }
    return SanPattern{wildcard, std::move(base)};
  } catch (const NameFormatError&) {
    return std::nullopt;
  }
}

const char* cause_name(Cause c) {
  switch (c) {
    case Cause::CERT: return "CERT";
    case Cause::IP: return "IP";
    case Cause::CRED: return "CRED";
  }
  return "?";
}

std::optional<Cause> cause_from_name(std::string_view name) {
  if (name == "CERT") return Cause::CERT;
  if (name == "IP") return Cause::IP;
  if (name == "CRED") return Cause::CRED;
  return std::nullopt;
}

}  // namespace h2reuse
