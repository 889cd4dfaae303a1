#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "h2reuse/model.hpp"

namespace h2reuse {

// Minimal DNS wire-format support for the resolver probe: plain A/AAAA
// queries, optionally with a zero-length EDNS client-subnet option used
// to detect resolvers that echo ECS back.

enum class DnsType : uint16_t { A = 1, AAAA = 28 };

// Builds a query message with RD set and one question.
std::vector<uint8_t> encode_dns_query(uint16_t id, const DnsName& qname, DnsType qtype,
                                      bool ecs_probe);

struct DnsResponse {
  uint16_t id = 0;
  int rcode = 0;
  bool truncated = false;
  std::vector<IpAddress> addresses;  // A/AAAA answer rdata
  bool saw_ecs_option = false;       // resolver echoed a client-subnet option
};

// Decodes a response message (handles name compression in answers).
// Throws ParseError on malformed data.
DnsResponse decode_dns_response(const std::vector<uint8_t>& message);

}  // namespace h2reuse
