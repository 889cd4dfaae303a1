#include "h2reuse/dnswire.hpp"

namespace h2reuse {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

struct Reader {
  const std::vector<uint8_t>& data;
  size_t pos = 0;

  uint8_t u8() {
    if (pos >= data.size()) throw ParseError("DNS message truncated");
    return data[pos++];
  }
  uint16_t u16() {
    uint16_t hi = u8();
    return static_cast<uint16_t>(hi << 8 | u8());
  }
  uint32_t u32() {
    uint32_t hi = u16();
    return hi << 16 | u16();
  }
  void skip(size_t n) {
    if (pos + n > data.size()) throw ParseError("DNS message truncated");
    pos += n;
  }
};

// Skips over a possibly compressed name starting at the reader.
void skip_name(Reader& r) {
  int guard = 0;
  while (true) {
    if (++guard > 128) throw ParseError("DNS name loop");
    uint8_t len = r.u8();
    if (len == 0) return;
    if ((len & 0xc0) == 0xc0) {
      r.u8();  // second pointer byte
      return;
    }
    r.skip(len);
  }
}

}  // namespace

std::vector<uint8_t> encode_dns_query(uint16_t id, const DnsName& qname, DnsType qtype,
                                      bool ecs_probe) {
  std::vector<uint8_t> out;
  put_u16(out, id);
  put_u16(out, 0x0100);  // RD
  put_u16(out, 1);       // QDCOUNT
  put_u16(out, 0);       // ANCOUNT
  put_u16(out, 0);       // NSCOUNT
  put_u16(out, ecs_probe ? 1 : 0);  // ARCOUNT (OPT)
  for (const std::string& label : qname.labels()) {
    out.push_back(static_cast<uint8_t>(label.size()));
    out.insert(out.end(), label.begin(), label.end());
  }
  out.push_back(0);
  put_u16(out, static_cast<uint16_t>(qtype));
  put_u16(out, 1);  // IN

  if (ecs_probe) {
    // OPT pseudo-record carrying a zero-scope, zero-length client
    // subnet: leaks nothing, but ECS-aware resolvers echo it.
    out.push_back(0);       // root name
    put_u16(out, 41);       // OPT
    put_u16(out, 1232);     // UDP payload size
    put_u16(out, 0);        // extended rcode/version
    put_u16(out, 0);        // flags
    put_u16(out, 8);        // RDLEN
    put_u16(out, 8);        // option: CLIENT-SUBNET
    put_u16(out, 4);        // option length
    put_u16(out, 1);        // family: IPv4
    out.push_back(0);       // source prefix length 0 (no address bytes follow)
    out.push_back(0);       // scope prefix length 0
  }
  return out;
}

DnsResponse decode_dns_response(const std::vector<uint8_t>& message) {
  Reader r{message};
  DnsResponse resp;
  resp.id = r.u16();
  uint16_t flags = r.u16();
  if ((flags & 0x8000) == 0) throw ParseError("DNS message is not a response");
  resp.truncated = (flags & 0x0200) != 0;
  resp.rcode = flags & 0x000f;
  uint16_t qdcount = r.u16();
  uint16_t ancount = r.u16();
  uint16_t nscount = r.u16();
  uint16_t arcount = r.u16();

  for (uint16_t i = 0; i < qdcount; ++i) {
    skip_name(r);
    r.skip(4);  // qtype + qclass
  }

  auto read_record = [&](bool collect) {
    skip_name(r);
    uint16_t type = r.u16();
    uint16_t rclass = r.u16();
    r.u32();  // TTL
    uint16_t rdlen = r.u16();
    if (collect && rclass == 1 && type == static_cast<uint16_t>(DnsType::A) && rdlen == 4) {
      if (r.pos + 4 > message.size()) throw ParseError("DNS message truncated");
      resp.addresses.push_back(IpAddress::from_bytes(IpFamily::V4, message.data() + r.pos));
      r.skip(4);
    } else if (collect && rclass == 1 && type == static_cast<uint16_t>(DnsType::AAAA) &&
               rdlen == 16) {
      if (r.pos + 16 > message.size()) throw ParseError("DNS message truncated");
      resp.addresses.push_back(IpAddress::from_bytes(IpFamily::V6, message.data() + r.pos));
      r.skip(16);
    } else if (type == 41) {  // OPT
      size_t end = r.pos + rdlen;
      if (end > message.size()) throw ParseError("DNS message truncated");
      while (r.pos + 4 <= end) {
        uint16_t opt = r.u16();
        uint16_t len = r.u16();
        if (opt == 8) resp.saw_ecs_option = true;
        r.skip(len);
      }
      r.pos = end;
    } else {
      r.skip(rdlen);
    }
  };

  for (uint16_t i = 0; i < ancount; ++i) read_record(true);
  for (uint16_t i = 0; i < nscount; ++i) read_record(false);
  for (uint16_t i = 0; i < arcount; ++i) read_record(false);
  return resp;
}

}  // namespace h2reuse
