#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "h2reuse/ingest_har.hpp"
#include "h2reuse/util.hpp"

using namespace h2reuse;

namespace {

std::string fixture_path(const std::string& name) {
  return std::string(FIXTURES_DIR) + "/" + name;
}

std::string fixture(const std::string& name) { return read_file(fixture_path(name)); }

}  // namespace

TEST_CASE("load_har reads the smallest valid file") {
  HarPage page = load_har(fixture("minimal.har"));
  REQUIRE(page.entries.size() == 1);
  const HarEntry& e = page.entries[0];
  CHECK(e.request_id == "r1");
  CHECK(e.socket_id == 7);
  CHECK(e.protocol == Protocol::H2);
  CHECK(e.status == 200);
  CHECK(e.start_ms == doctest::Approx(120.0));
  CHECK(e.duration_ms == doctest::Approx(83.5));
  REQUIRE(e.server_endpoint.has_value());
  CHECK(e.server_endpoint->str() == "192.0.2.10:443");
  REQUIRE(e.certificate.has_value());
  CHECK(e.certificate->issuer_org == "Example CA");
  CHECK(e.certificate->san_dns_names.size() == 2);
  CHECK(page.page_url == "https://www.example.test/");
}

TEST_CASE("three entries sharing a socket stay one connection key") {
  HarPage page = load_har(fixture("shared_socket.har"));
  REQUIRE(page.entries.size() == 3);
  for (const HarEntry& e : page.entries) CHECK(e.socket_id == 7);

  auto [kept, stats] = filter_requests(page.entries);
  CHECK(kept.size() == 3);
  CHECK(stats.total() == 0);
  SessionTimeline t = reconstruct_sessions(page, kept, stats, DurationModel::ENDLESS);
  REQUIRE(t.sessions.size() == 1);
  CHECK(t.sessions[0].requests.size() == 3);
}

TEST_CASE("truncated byte stream raises a parse error naming the offset") {
  std::string doc = fixture("minimal.har");
  doc.resize(doc.size() / 2);
  try {
    load_har(doc);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("HAR without entries is an empty page, not an error") {
  HarPage page = load_har(R"({"log": {"version": "1.2", "entries": []}})");
  CHECK(page.entries.empty());
}

TEST_CASE("non-HAR JSON is rejected") {
  CHECK_THROWS_AS(load_har(R"({"not": "har"})"), ParseError);
}

TEST_CASE("filter rules drop by first matching reason") {
  HarPage page = load_har(fixture("filter_categories.har"));
  auto [kept, stats] = filter_requests(page.entries);

  CHECK(stats.socket_id_zero == 1);
  CHECK(stats.missing_ip == 1);
  CHECK(stats.invalid_method == 1);
  CHECK(stats.invalid_version == 1);
  CHECK(stats.invalid_status == 1);
  CHECK(stats.bad_page_ref == 1);
  CHECK(stats.missing_certificate == 1);
  CHECK(stats.non_h2_protocol == 1);
  CHECK(stats.missing_request_id == 1);
  CHECK(stats.invalid_url == 0);
  // Only the two consistent-looking socket-5 entries survive here...
  CHECK(kept.size() == 2);
  CHECK(kept.size() + stats.total() == page.entries.size());

  // ...and die during reconstruction for disagreeing on the endpoint.
  SessionTimeline t = reconstruct_sessions(page, kept, stats, DurationModel::ENDLESS);
  CHECK(t.sessions.empty());
  CHECK(t.filters.inconsistent_ip == 1);
}

TEST_CASE("kept plus dropped equals total on arbitrary entries") {
  HarPage page = load_har(fixture("filter_categories.har"));
  auto [kept, stats] = filter_requests(page.entries);
  CHECK(kept.size() + stats.total() == page.entries.size());
}

TEST_CASE("a structurally invalid certificate drops the whole file") {
  SessionTimeline t = ingest_har(fixture("bad_cert_file.har"));
  CHECK(t.sessions.empty());
  CHECK(t.filters.invalid_certificate_file == 1);
}

TEST_CASE("reconstruction groups by socket and applies the duration model") {
  // Four entries on sockets {1,1,2,2}.
  HarPage page;
  auto entry = [&](const char* id, uint64_t socket, double start, double duration,
                   const char* url) {
    HarEntry e;
    e.request_id = id;
    e.page_ref_known = true;
    e.start_ms = start;
    e.duration_ms = duration;
    e.method = "GET";
    e.url = url;
    e.http_version = "h2";
    e.protocol = Protocol::H2;
    e.version_recognized = true;
    e.status = 200;
    e.server_endpoint = Endpoint{IpAddress::parse(socket == 1 ? "192.0.2.1" : "192.0.2.2"), 443};
    e.socket_id = socket;
    e.socket_id_present = true;
    Certificate c;
    c.issuer_org = "CA";
    c.san_dns_names.push_back(*SanPattern::parse("*.grp.test"));
    e.certificate = c;
    return e;
  };
  page.page_url = "https://a.grp.test/";
  page.entries.push_back(entry("r1", 1, 0, 80, "https://a.grp.test/"));
  page.entries.push_back(entry("r2", 1, 30, 90, "https://a.grp.test/x"));
  page.entries.push_back(entry("r3", 2, 40, 40, "https://b.grp.test/"));
  page.entries.push_back(entry("r4", 2, 50, 30, "https://b.grp.test/y"));

  auto [kept, stats] = filter_requests(page.entries);
  REQUIRE(kept.size() == 4);

  SUBCASE("IMMEDIATE closes at the last request end") {
    SessionTimeline t = reconstruct_sessions(page, kept, stats, DurationModel::IMMEDIATE);
    REQUIRE(t.sessions.size() == 2);
    CHECK(t.sessions[0].conn_id == "s1");
    CHECK(t.sessions[0].open_ms == 0);
    CHECK(t.sessions[0].close_ms == doctest::Approx(120));  // max(80, 30+90)
    CHECK(t.sessions[1].conn_id == "s2");
    CHECK(t.sessions[1].open_ms == 40);
    CHECK(t.sessions[1].close_ms == doctest::Approx(80));
    CHECK(t.sessions[0].initial_origin.host.str() == "a.grp.test");
  }
  SUBCASE("ENDLESS never closes") {
    SessionTimeline t = reconstruct_sessions(page, kept, stats, DurationModel::ENDLESS);
    REQUIRE(t.sessions.size() == 2);
    CHECK(t.sessions[0].close_ms == kOpenForever);
    CHECK(t.sessions[1].close_ms == kOpenForever);
  }
}

TEST_CASE("421 responses are kept and recorded as excluded domains") {
  HarPage page = load_har(fixture("shared_socket.har"));
  page.entries[2].status = 421;
  page.entries[2].url = "https://other.example.test/misdirected";
  auto [kept, stats] = filter_requests(page.entries);
  CHECK(kept.size() == 3);  // 421 is not a drop
  SessionTimeline t = reconstruct_sessions(page, kept, stats, DurationModel::ENDLESS);
  REQUIRE(t.sessions.size() == 1);
  CHECK(t.sessions[0].excluded_domains.count(DnsName::parse("other.example.test")) == 1);
}

TEST_CASE("certificate conflicts on one socket warn but keep the first") {
  HarPage page = load_har(fixture("shared_socket.har"));
  REQUIRE(page.entries[1].certificate.has_value());
  page.entries[1].certificate->issuer_org = "Different CA";
  auto [kept, stats] = filter_requests(page.entries);
  SessionTimeline t = reconstruct_sessions(page, kept, stats, DurationModel::ENDLESS);
  REQUIRE(t.sessions.size() == 1);
  CHECK(t.sessions[0].certificate.issuer_org == "Example CA");
  CHECK(t.warnings.cert_conflicts == 1);
}

TEST_CASE("HAR-sourced requests always carry unknown credential hints") {
  SessionTimeline t = ingest_har(fixture("shared_socket.har"));
  for (const ConnectionSession& s : t.sessions)
    for (const RequestEvent& r : s.requests)
      CHECK(r.credentials == CredentialsHint::UNKNOWN);
}

TEST_CASE("re-ingesting the same bytes yields an identical timeline") {
  std::string doc = fixture("shared_socket.har");
  SessionTimeline a = ingest_har(doc);
  SessionTimeline b = ingest_har(doc);
  REQUIRE(a.sessions.size() == b.sessions.size());
  for (size_t i = 0; i < a.sessions.size(); ++i) {
    CHECK(a.sessions[i].conn_id == b.sessions[i].conn_id);
    CHECK(a.sessions[i].open_ms == b.sessions[i].open_ms);
    CHECK(a.sessions[i].close_ms == b.sessions[i].close_ms);
    CHECK(a.sessions[i].requests.size() == b.sessions[i].requests.size());
  }
}

TEST_CASE("gzip-compressed HAR files ingest transparently") {
  std::string path = fixture_path("minimal.har");
  std::string gz_path = "/tmp/h2reuse_test_minimal.har.gz";
  REQUIRE(std::system(("gzip -c '" + path + "' > " + gz_path).c_str()) == 0);
  SessionTimeline t = ingest_har_file(gz_path);
  CHECK(t.sessions.size() == 1);
}

TEST_CASE("ISO 8601 timestamps parse with fractions and offsets") {
  double base = parse_iso8601_ms("2021-04-20T12:00:00.000Z");
  CHECK(parse_iso8601_ms("2021-04-20T12:00:00.120Z") - base == doctest::Approx(120));
  CHECK(parse_iso8601_ms("2021-04-20T14:00:00+02:00") - base == doctest::Approx(0));
  CHECK(parse_iso8601_ms("2021-04-20T11:30:00-00:30") - base == doctest::Approx(0));
  CHECK_THROWS_AS(parse_iso8601_ms("yesterday"), ParseError);
}
