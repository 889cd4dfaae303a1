#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "h2reuse/classify.hpp"
#include "h2reuse/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace h2reuse;

TEST_CASE("san_covers: literals, wildcards, case folding") {
  Certificate c = fixtures::cert("CA", {"img.example.tld"});
  CHECK(san_covers(c, DnsName::parse("img.example.tld")));
  CHECK(san_covers(c, DnsName::parse("IMG.EXAMPLE.TLD")));
  CHECK_FALSE(san_covers(c, DnsName::parse("example.tld")));

  Certificate w = fixtures::cert("CA", {"*.example.tld"});
  CHECK(w.san_dns_names.size() == 1);
  CHECK(san_covers(w, DnsName::parse("a.example.tld")));
  // The wildcard never matches the bare base name nor two labels.
  CHECK_FALSE(san_covers(w, DnsName::parse("example.tld")));
  CHECK_FALSE(san_covers(w, DnsName::parse("a.b.example.tld")));
}

TEST_CASE("san_covers agrees with the reference matcher on a case table") {
  struct Row {
    std::vector<std::string> sans;
    const char* host;
    bool expect;
  };
  const Row rows[] = {
      {{"a.tld"}, "a.tld", true},
      {{"a.tld"}, "b.tld", false},
      {{"A.TLD"}, "a.tld", true},
      {{"*.a.tld"}, "x.a.tld", true},
      {{"*.a.tld"}, "a.tld", false},
      {{"*.a.tld"}, "x.y.a.tld", false},
      {{"*.a.tld", "a.tld"}, "a.tld", true},
      {{"b.tld", "*.c.tld"}, "x.c.tld", true},
  };
  for (const Row& row : rows) {
    Certificate c = fixtures::cert("CA", row.sans);
    CHECK_MESSAGE(san_covers(c, DnsName::parse(row.host)) == row.expect, row.host);
    CHECK_MESSAGE(oracle::ref_covers(row.sans, row.host) == row.expect, row.host);
  }
}

TEST_CASE("reuse_verdict distinguishes the four outcomes") {
  Certificate c = fixtures::cert("CA", {"a.x"});
  ConnectionSession existing = fixtures::session("s1", "1.2.3.4", 443, "a.x", c, 0);
  Origin target{DnsName::parse("a.x"), 443};

  SUBCASE("both conditions met") {
    CHECK(reuse_verdict(existing, target, Endpoint{IpAddress::parse("1.2.3.4"), 443}) ==
          ReuseVerdict::REUSABLE);
  }
  SUBCASE("observed endpoint differs") {
    CHECK(reuse_verdict(existing, target, Endpoint{IpAddress::parse("1.2.3.5"), 443}) ==
          ReuseVerdict::IP_MISMATCH);
  }
  SUBCASE("certificate does not cover the target") {
    Origin other{DnsName::parse("b.x"), 443};
    CHECK(reuse_verdict(existing, other, Endpoint{IpAddress::parse("1.2.3.4"), 443}) ==
          ReuseVerdict::CERT_MISMATCH);
  }
  SUBCASE("an earlier 421 excludes the domain") {
    existing.excluded_domains.insert(DnsName::parse("a.x"));
    CHECK(reuse_verdict(existing, target, Endpoint{IpAddress::parse("1.2.3.4"), 443}) ==
          ReuseVerdict::EXCLUDED_421);
  }
}

TEST_CASE("worked example: four same-endpoint connections, certs A,B,A,B") {
  SessionTimeline timeline = fixtures::worked_example();
  PageFindings result = analyze_page(timeline, FetchMode::FOLLOW_FETCH);

  REQUIRE(result.findings.size() == 3);
  CHECK(result.redundant == 3);
  CHECK(result.total_h2_connections == 4);
  CHECK(result.cause_connections[Cause::CERT] == 3);
  CHECK(result.cause_connections[Cause::CRED] == 2);
  CHECK(result.cause_connections.count(Cause::IP) == 0);

  const Finding& f2 = result.findings[0];
  CHECK(f2.conn_id == "s2");
  CHECK(f2.causes.at(Cause::CERT) == std::vector<ConnId>{"s1"});
  CHECK(f2.causes.size() == 1);

  const Finding& f3 = result.findings[1];
  CHECK(f3.conn_id == "s3");
  CHECK(f3.causes.at(Cause::CERT) == std::vector<ConnId>{"s2"});
  CHECK(f3.causes.at(Cause::CRED) == std::vector<ConnId>{"s1"});

  const Finding& f4 = result.findings[2];
  CHECK(f4.conn_id == "s4");
  CHECK(f4.causes.at(Cause::CERT) == std::vector<ConnId>{"s1", "s3"});
  CHECK(f4.causes.at(Cause::CRED) == std::vector<ConnId>{"s2"});

  // prev origin = initial origin of the earliest witness per cause.
  CHECK(f4.prev_origin_per_cause.at(Cause::CERT).host.str() == "one.shard.test");
  CHECK(f4.prev_origin_per_cause.at(Cause::CRED).host.str() == "two.shard.test");
}

TEST_CASE("single connection is never redundant") {
  Certificate c = fixtures::cert("CA", {"solo.test"});
  SessionTimeline t = fixtures::page("https://solo.test/", DurationModel::ENDLESS,
                                     {fixtures::session("s1", "192.0.2.1", 443, "solo.test", c, 0)});
  PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
  CHECK(result.findings.empty());
  CHECK(result.redundant == 0);
}

TEST_CASE("unknown third parties produce no finding") {
  SessionTimeline t = fixtures::page(
      "https://independent.test/", DurationModel::ENDLESS,
      {fixtures::session("s1", "192.0.2.1", 443, "one.test",
                         fixtures::cert("CA", {"one.test"}), 0),
       fixtures::session("s2", "192.0.2.2", 443, "two.test",
                         fixtures::cert("CA", {"two.test"}), 50)});
  PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
  CHECK(result.findings.empty());
}

TEST_CASE("covering certificate at a different endpoint yields IP") {
  Certificate tag_cert = fixtures::cert("Big CA", {"tags.test", "metrics.test"});
  Certificate metrics_cert = fixtures::cert("Big CA", {"metrics.test"});
  SessionTimeline t = fixtures::page(
      "https://shop.test/", DurationModel::ENDLESS,
      {fixtures::session("s1", "198.51.100.1", 443, "tags.test", tag_cert, 0),
       fixtures::session("s2", "198.51.100.2", 443, "metrics.test", metrics_cert, 100)});
  PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
  REQUIRE(result.findings.size() == 1);
  CHECK(result.findings[0].conn_id == "s2");
  CHECK(result.findings[0].causes.at(Cause::IP) == std::vector<ConnId>{"s1"});
  CHECK(result.findings[0].prev_origin_per_cause.at(Cause::IP).host.str() == "tags.test");
}

TEST_CASE("same initial domain on different endpoints is CRED, not IP") {
  Certificate c = fixtures::cert("CA", {"app.test"});
  SessionTimeline t = fixtures::page(
      "https://app.test/", DurationModel::ENDLESS,
      {fixtures::session("s1", "198.51.100.1", 443, "app.test", c, 0),
       fixtures::session("s2", "198.51.100.2", 443, "app.test", c, 100)});
  PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
  REQUIRE(result.findings.size() == 1);
  CHECK(result.findings[0].causes.count(Cause::CRED) == 1);
  CHECK(result.findings[0].causes.count(Cause::IP) == 0);
  // SANs also overlapped, so the pair is flagged for inspection.
  CHECK(result.findings[0].dual_role_witnesses == std::vector<ConnId>{"s1"});
}

TEST_CASE("421 exclusion removes reuse-based witnesses but not CERT") {
  Certificate c1 = fixtures::cert("CA", {"a.test", "b.test"});
  ConnectionSession s1 = fixtures::session("s1", "192.0.2.1", 443, "a.test", c1, 0);
  s1.excluded_domains.insert(DnsName::parse("b.test"));

  SUBCASE("no CRED witness for an excluded domain") {
    SessionTimeline t = fixtures::page(
        "https://a.test/", DurationModel::ENDLESS,
        {s1, fixtures::session("s2", "192.0.2.1", 443, "b.test",
                               fixtures::cert("CA", {"b.test"}), 100)});
    PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
    CHECK(result.findings.empty());
  }
  SUBCASE("no IP witness for an excluded domain") {
    SessionTimeline t = fixtures::page(
        "https://a.test/", DurationModel::ENDLESS,
        {s1, fixtures::session("s2", "192.0.2.9", 443, "b.test",
                               fixtures::cert("CA", {"b.test"}), 100)});
    PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
    CHECK(result.findings.empty());
  }
  SUBCASE("CERT attribution is unaffected by exclusions") {
    ConnectionSession narrow = fixtures::session("s1", "192.0.2.1", 443, "a.test",
                                                 fixtures::cert("CA", {"a.test"}), 0);
    narrow.excluded_domains.insert(DnsName::parse("b.test"));
    SessionTimeline t = fixtures::page(
        "https://a.test/", DurationModel::ENDLESS,
        {narrow, fixtures::session("s2", "192.0.2.1", 443, "b.test",
                                   fixtures::cert("CA", {"b.test"}), 100)});
    PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
    REQUIRE(result.findings.size() == 1);
    CHECK(result.findings[0].causes.at(Cause::CERT) == std::vector<ConnId>{"s1"});
  }
}

TEST_CASE("IGNORE_FETCH without hints produces no CRED findings") {
  SessionTimeline timeline = fixtures::worked_example();
  PageFindings result = analyze_page(timeline, FetchMode::IGNORE_FETCH);
  for (const Finding& f : result.findings) CHECK(f.causes.count(Cause::CRED) == 0);
  // CERT attribution is unaffected.
  CHECK(result.cause_connections[Cause::CERT] == 3);
}

TEST_CASE("IGNORE_FETCH with hints keeps CRED only when hints differ") {
  Certificate c = fixtures::cert("CA", {"a.test"});
  auto make = [&](CredentialsHint h1, CredentialsHint h2) {
    return fixtures::page(
        "https://a.test/", DurationModel::ENDLESS,
        {fixtures::session("s1", "192.0.2.1", 443, "a.test", c, 0, kOpenForever, h1),
         fixtures::session("s2", "192.0.2.1", 443, "a.test", c, 100, kOpenForever, h2)});
  };

  PageFindings differing = analyze_page(
      make(CredentialsHint::INCLUDED, CredentialsHint::OMITTED), FetchMode::IGNORE_FETCH);
  REQUIRE(differing.findings.size() == 1);
  CHECK(differing.findings[0].causes.count(Cause::CRED) == 1);

  PageFindings matching = analyze_page(
      make(CredentialsHint::INCLUDED, CredentialsHint::INCLUDED), FetchMode::IGNORE_FETCH);
  CHECK(matching.findings.empty());

  PageFindings unknown = analyze_page(
      make(CredentialsHint::UNKNOWN, CredentialsHint::OMITTED), FetchMode::IGNORE_FETCH);
  CHECK(unknown.findings.empty());

  // FOLLOW_FETCH attributes CRED regardless of hint agreement.
  PageFindings follow = analyze_page(
      make(CredentialsHint::INCLUDED, CredentialsHint::INCLUDED), FetchMode::FOLLOW_FETCH);
  REQUIRE(follow.findings.size() == 1);
  CHECK(follow.findings[0].causes.count(Cause::CRED) == 1);
}

TEST_CASE("port-mismatched SAN matches are counted, not attributed") {
  Certificate c = fixtures::cert("CA", {"a.test", "b.test"});
  SessionTimeline t = fixtures::page(
      "https://a.test/", DurationModel::ENDLESS,
      {fixtures::session("s1", "192.0.2.1", 8443, "a.test", c, 0),
       fixtures::session("s2", "192.0.2.1", 443, "b.test",
                         fixtures::cert("CA", {"b.test"}), 100)});
  PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
  CHECK(result.findings.empty());
  CHECK(result.diagnostics.port_mismatch_san_matches == 1);
}

TEST_CASE("IMMEDIATE model drops witnesses whose interval closed") {
  SessionTimeline endless = fixtures::worked_example(DurationModel::ENDLESS);
  SessionTimeline immediate = fixtures::worked_example(DurationModel::IMMEDIATE);
  // Requests last 50 ms and opens are 100 ms apart, so under IMMEDIATE
  // nothing stays open long enough to witness anything.
  PageFindings result = analyze_page(immediate, FetchMode::FOLLOW_FETCH);
  CHECK(result.findings.empty());
  PageFindings endless_result = analyze_page(endless, FetchMode::FOLLOW_FETCH);
  CHECK(endless_result.findings.size() == 3);
}

TEST_CASE("sweep equals exhaustive pairwise evaluation on random pages") {
  std::mt19937 rng(1234);
  synthetic::Options options;
  options.with_421 = true;
  for (int i = 0; i < 200; ++i) {
    options.with_credentials = i % 2 == 0;
    SessionTimeline endless = synthetic::make_page(rng, options, "https://p.test/");
    for (DurationModel model : {DurationModel::ENDLESS, DurationModel::IMMEDIATE}) {
      SessionTimeline t = synthetic::with_model(endless, model);
      for (FetchMode mode : {FetchMode::FOLLOW_FETCH, FetchMode::IGNORE_FETCH}) {
        PageFindings sweep = analyze_page(t, mode);
        auto brute = oracle::brute_force(t, mode);
        REQUIRE(oracle::triples(sweep.findings) == oracle::triples(brute));
        // prev origins agree as well.
        for (const Finding& f : sweep.findings) {
          const oracle::RefFinding& ref = brute.at(f.conn_id);
          for (const auto& [cause, origin] : f.prev_origin_per_cause)
            CHECK(origin.host.str() == ref.prev_host.at(cause));
        }
      }
    }
  }
}

TEST_CASE("witness geometry invariants hold on random pages") {
  std::mt19937 rng(99);
  synthetic::Options options;
  options.with_421 = true;
  for (int i = 0; i < 100; ++i) {
    SessionTimeline t = synthetic::make_page(rng, options, "https://geom.test/");
    std::map<ConnId, const ConnectionSession*> by_id;
    for (const ConnectionSession& s : t.sessions) by_id.emplace(s.conn_id, &s);
    PageFindings result = analyze_page(t, FetchMode::FOLLOW_FETCH);
    for (const Finding& f : result.findings) {
      const ConnectionSession& subject = *by_id.at(f.conn_id);
      for (const auto& [cause, witnesses] : f.causes) {
        for (const ConnId& id : witnesses) {
          const ConnectionSession& witness = *by_id.at(id);
          if (cause == Cause::CERT) CHECK(witness.endpoint == subject.endpoint);
          if (cause == Cause::IP) CHECK(witness.endpoint != subject.endpoint);
          if (cause == Cause::CRED)
            CHECK((witness.endpoint == subject.endpoint ||
                   witness.initial_origin.host == subject.initial_origin.host));
        }
      }
    }
  }
}

TEST_CASE("classify_connection rejects non-overlapping priors") {
  Certificate c = fixtures::cert("CA", {"a.test"});
  ConnectionSession closed = fixtures::session("s1", "192.0.2.1", 443, "a.test", c, 0, 10);
  ConnectionSession subject = fixtures::session("s2", "192.0.2.1", 443, "a.test", c, 50);
  std::vector<const ConnectionSession*> priors{&closed};
  CHECK_THROWS_AS(classify_connection(subject, priors, FetchMode::FOLLOW_FETCH),
                  InternalError);
}
