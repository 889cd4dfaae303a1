#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "h2reuse/classify.hpp"
#include "h2reuse/poolsim.hpp"
#include "h2reuse/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace h2reuse;

TEST_CASE("worked-example fixture coalesces to one connection per certificate") {
  SessionTimeline t = fixtures::worked_example();
  PoolPolicy policy;
  policy.credentials_partitioning = false;
  SimResult result = simulate_pool(t, policy);
  CHECK(result.observed == 4);
  CHECK(result.opened == 2);
  CHECK(result.saved() == 2);
  // #1 and #3 share certificate A, #2 and #4 share B.
  CHECK(result.mapping.at("s1") == result.mapping.at("s3"));
  CHECK(result.mapping.at("s2") == result.mapping.at("s4"));
  CHECK(result.mapping.at("s1") != result.mapping.at("s2"));
}

TEST_CASE("a page without redundancy saves nothing") {
  SessionTimeline t = fixtures::page(
      "https://independent.test/", DurationModel::ENDLESS,
      {fixtures::session("s1", "192.0.2.1", 443, "one.test",
                         fixtures::cert("CA", {"one.test"}), 0),
       fixtures::session("s2", "192.0.2.2", 443, "two.test",
                         fixtures::cert("CA", {"two.test"}), 50)});
  CHECK(analyze_page(t, FetchMode::FOLLOW_FETCH).findings.empty());
  SimResult result = simulate_pool(t, PoolPolicy{});
  CHECK(result.saved() == 0);
}

TEST_CASE("one shared certificate and endpoint collapses everything") {
  Certificate shared = fixtures::cert("CA", {"*.pool.test", "pool.test"});
  std::vector<ConnectionSession> sessions;
  for (int i = 1; i <= 4; ++i)
    sessions.push_back(fixtures::session("s" + std::to_string(i), "192.0.2.7", 443,
                                         std::string(1, char('a' + i - 1)) + ".pool.test",
                                         shared, i * 100));
  SessionTimeline t = fixtures::page("https://a.pool.test/", DurationModel::ENDLESS,
                                     std::move(sessions));
  PoolPolicy policy;
  policy.credentials_partitioning = false;
  SimResult result = simulate_pool(t, policy);
  CHECK(result.opened == 1);
  CHECK(result.saved() == 3);
}

TEST_CASE("closed simulated connections are not reused") {
  Certificate shared = fixtures::cert("CA", {"*.pool.test"});
  SessionTimeline t = fixtures::page(
      "https://a.pool.test/", DurationModel::IMMEDIATE,
      {fixtures::session("s1", "192.0.2.7", 443, "a.pool.test", shared, 0, 50),
       fixtures::session("s2", "192.0.2.7", 443, "b.pool.test", shared, 200, 260)});
  SimResult result = simulate_pool(t, PoolPolicy{});
  CHECK(result.opened == 2);  // s1's replacement closed before s2 opened
  CHECK(result.saved() == 0);
}

TEST_CASE("credentials partitioning splits incompatible hints") {
  Certificate shared = fixtures::cert("CA", {"cred.test"});
  SessionTimeline t = fixtures::page(
      "https://cred.test/", DurationModel::ENDLESS,
      {fixtures::session("s1", "192.0.2.7", 443, "cred.test", shared, 0, kOpenForever,
                         CredentialsHint::INCLUDED),
       fixtures::session("s2", "192.0.2.7", 443, "cred.test", shared, 100, kOpenForever,
                         CredentialsHint::OMITTED),
       fixtures::session("s3", "192.0.2.7", 443, "cred.test", shared, 200, kOpenForever,
                         CredentialsHint::UNKNOWN)});

  PoolPolicy partitioning;
  partitioning.credentials_partitioning = true;
  SimResult on = simulate_pool(t, partitioning);
  CHECK(on.opened == 2);  // s3's unknown hint is compatible with anything

  PoolPolicy merged;
  merged.credentials_partitioning = false;
  SimResult off = simulate_pool(t, merged);
  CHECK(off.opened == 1);
  CHECK(off.opened <= on.opened);
}

TEST_CASE("421-excluded domains stay excluded after coalescing") {
  Certificate shared = fixtures::cert("CA", {"*.ex.test", "ex.test"});
  ConnectionSession refused = fixtures::session("s1", "192.0.2.7", 443, "a.ex.test", shared, 0);
  refused.excluded_domains.insert(DnsName::parse("b.ex.test"));
  SessionTimeline t = fixtures::page(
      "https://a.ex.test/", DurationModel::ENDLESS,
      {refused, fixtures::session("s2", "192.0.2.7", 443, "b.ex.test", shared, 100)});
  SimResult result = simulate_pool(t, PoolPolicy{});
  CHECK(result.opened == 2);
}

TEST_CASE("clearing the always-true policy flags is a configuration error") {
  SessionTimeline t = fixtures::worked_example();
  PoolPolicy policy;
  policy.reuse_requires_san = false;
  CHECK_THROWS_AS(simulate_pool(t, policy), ConfigError);
  policy.reuse_requires_san = true;
  policy.reuse_requires_endpoint = false;
  CHECK_THROWS_AS(simulate_pool(t, policy), ConfigError);
}

TEST_CASE("pool bounds hold on random hint-free pages") {
  std::mt19937 rng(2024);
  synthetic::Options options;
  options.with_421 = true;
  for (int i = 0; i < 200; ++i) {
    SessionTimeline endless = synthetic::make_page(rng, options, "https://pool.test/");
    for (DurationModel model : {DurationModel::ENDLESS, DurationModel::IMMEDIATE}) {
      SessionTimeline t = synthetic::with_model(endless, model);
      PoolPolicy on;
      PoolPolicy off;
      off.credentials_partitioning = false;
      SimResult r_on = simulate_pool(t, on);
      SimResult r_off = simulate_pool(t, off);
      CHECK(r_on.opened <= r_on.observed);
      CHECK(r_off.opened <= r_off.observed);
      // Without hint data partitioning cannot split anything.
      CHECK(r_off.opened <= r_on.opened);
      CHECK(r_on.mapping.size() == t.sessions.size());

      if (analyze_page(t, FetchMode::FOLLOW_FETCH).findings.empty())
        CHECK(r_on.saved() == 0);
    }
  }
}
