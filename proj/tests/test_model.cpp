#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "h2reuse/model.hpp"

using namespace h2reuse;

TEST_CASE("normalize_dns_name folds case and strips the trailing dot") {
  DnsName name = normalize_dns_name("WWW.Example.TLD.");
  CHECK(name.labels() == std::vector<std::string>{"www", "example", "tld"});
  CHECK(name.str() == "www.example.tld");

  DnsName plain = normalize_dns_name("img.example.tld");
  CHECK(plain.labels() == std::vector<std::string>{"img", "example", "tld"});
}

TEST_CASE("normalize_dns_name rejects bad input") {
  CHECK_THROWS_AS(normalize_dns_name(""), NameFormatError);
  CHECK_THROWS_AS(normalize_dns_name("."), NameFormatError);
  CHECK_THROWS_AS(normalize_dns_name("a..b"), NameFormatError);
  CHECK_THROWS_AS(normalize_dns_name("bad host.tld"), NameFormatError);
  CHECK_THROWS_AS(normalize_dns_name(std::string(64, 'x') + ".tld"), NameFormatError);
  CHECK_THROWS_AS(normalize_dns_name(std::string(300, 'x')), NameFormatError);
  // Punycode stays as-is.
  CHECK(normalize_dns_name("xn--mnchen-3ya.tld").str() == "xn--mnchen-3ya.tld");
}

TEST_CASE("normalize_dns_name is idempotent") {
  std::mt19937 rng(7);
  const char* samples[] = {"WWW.Example.TLD.", "a.b", "IMG.cdn.Example.ORG",
                           "xn--e1afmkfd.xn--p1ai.", "A-b_c.D2.e"};
  for (const char* raw : samples) {
    DnsName once = normalize_dns_name(raw);
    DnsName twice = normalize_dns_name(once.str());
    CHECK(once == twice);
    CHECK(once.str() == twice.str());
  }
  (void)rng;
}

TEST_CASE("endpoint equality is exact on (ip, port)") {
  Endpoint a{IpAddress::parse("192.0.2.1"), 443};
  Endpoint b{IpAddress::parse("192.0.2.1"), 443};
  Endpoint c{IpAddress::parse("192.0.2.1"), 8443};
  Endpoint d{IpAddress::parse("192.0.2.2"), 443};
  CHECK(a == b);
  CHECK(b == a);
  CHECK(a != c);
  CHECK(a != d);
  // v6 text forms canonicalize before comparison.
  Endpoint e1{IpAddress::parse("2001:db8::1"), 443};
  Endpoint e2{IpAddress::parse("2001:0db8:0000::0001"), 443};
  CHECK(e1 == e2);
}

TEST_CASE("endpoint parses and round-trips text form") {
  Endpoint v4 = Endpoint::parse("198.51.100.7:443");
  CHECK(v4.ip.str() == "198.51.100.7");
  CHECK(v4.port == 443);
  CHECK(v4.str() == "198.51.100.7:443");

  Endpoint v6 = Endpoint::parse("[2001:db8::5]:8443");
  CHECK(v6.port == 8443);
  CHECK(Endpoint::parse(v6.str()) == v6);

  CHECK_THROWS_AS(Endpoint::parse("192.0.2.1"), ParseError);
  CHECK_THROWS_AS(Endpoint::parse("192.0.2.1:0"), ParseError);
  CHECK_THROWS_AS(Endpoint::parse("192.0.2.1:99999"), ParseError);
}

TEST_CASE("origin_of extracts https origins") {
  Origin o1 = origin_of("https://www.google-analytics.com/x.js");
  CHECK(o1.host.str() == "www.google-analytics.com");
  CHECK(o1.port == 443);

  Origin o2 = origin_of("https://a.b:8443/");
  CHECK(o2.host.str() == "a.b");
  CHECK(o2.port == 8443);

  CHECK_THROWS_AS(origin_of("http://a.b/"), UnsupportedSchemeError);
  CHECK_THROWS_AS(origin_of("not a url"), UrlError);
  CHECK_THROWS_AS(origin_of("https://[2001:db8::1]/"), NameFormatError);
  // Userinfo is ignored, bare host accepted.
  CHECK(origin_of("https://user@host.test/p?q#f").host.str() == "host.test");
  CHECK(origin_of("HTTPS://UPPER.test").host.str() == "upper.test");
}

TEST_CASE("san patterns parse literals and one-label wildcards") {
  auto literal = SanPattern::parse("Img.Example.TLD");
  REQUIRE(literal.has_value());
  CHECK_FALSE(literal->wildcard);
  CHECK(literal->base.str() == "img.example.tld");

  auto wildcard = SanPattern::parse("*.example.tld");
  REQUIRE(wildcard.has_value());
  CHECK(wildcard->wildcard);
  CHECK(wildcard->base.str() == "example.tld");
  CHECK(wildcard->str() == "*.example.tld");

  CHECK_FALSE(SanPattern::parse("a.*.tld").has_value());   // embedded wildcard
  CHECK_FALSE(SanPattern::parse("*x.example.tld").has_value());
  CHECK_FALSE(SanPattern::parse("").has_value());
  CHECK_FALSE(SanPattern::parse("192.0.2.1").has_value());  // IP SANs carry no DNS meaning
}

TEST_CASE("open-forever sentinel orders after every finite time") {
  CHECK(kOpenForever > 0.0);
  CHECK(kOpenForever > 1e18);
  ConnectionSession s;
  s.open_ms = 5;
  s.close_ms = kOpenForever;
  CHECK(s.open_at(5));
  CHECK(s.open_at(1e12));
  CHECK_FALSE(s.open_at(4.999));
}

TEST_CASE("session order breaks open-time ties by id") {
  ConnectionSession a, b;
  a.conn_id = "s1";
  a.open_ms = 10;
  b.conn_id = "s2";
  b.open_ms = 10;
  CHECK(opens_before(a, b));
  CHECK_FALSE(opens_before(b, a));
  b.open_ms = 9;
  CHECK(opens_before(b, a));
}

TEST_CASE("cause names round-trip") {
  for (Cause c : kAllCauses) CHECK(cause_from_name(cause_name(c)) == c);
  CHECK_FALSE(cause_from_name("BOGUS").has_value());
}
