#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "h2reuse/classify.hpp"
#include "h2reuse/ingest_netlog.hpp"
#include "h2reuse/util.hpp"

using namespace h2reuse;

namespace {

std::string fixture(const std::string& name) {
  return read_file(std::string(FIXTURES_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("parse_netlog decodes events with symbolic names") {
  NetlogDocument doc = parse_netlog(fixture("two_sessions.netlog.json"));
  CHECK(doc.events.size() == 16);

  std::set<uint32_t> session_sources;
  for (const EventRecord& e : doc.events)
    if (e.source_type == "HTTP2_SESSION") session_sources.insert(e.source_id);
  CHECK(session_sources == std::set<uint32_t>{30, 40});

  bool saw_unknown = false;
  for (const EventRecord& e : doc.events)
    if (e.event_type == "UNKNOWN_99999") saw_unknown = true;
  CHECK(saw_unknown);
  CHECK(doc.warnings.unknown_codes == 1);
}

TEST_CASE("a log without constants is rejected") {
  CHECK_THROWS_AS(parse_netlog(R"({"events": []})"), ParseError);
}

TEST_CASE("a log cut off mid-array is salvaged with a warning") {
  std::string doc = fixture("two_sessions.netlog.json");
  // Cut inside the last event object.
  size_t cut = doc.rfind("HTTP/1.1 200");
  REQUIRE(cut != std::string::npos);
  NetlogDocument salvaged = parse_netlog(doc.substr(0, cut));
  CHECK(salvaged.warnings.truncated_tail == 1);
  CHECK(salvaged.events.size() == 15);  // everything before the cut event
}

TEST_CASE("stitch_sessions reads lifecycle, endpoint, certificate and requests") {
  SessionTimeline t = stitch_sessions(parse_netlog(fixture("two_sessions.netlog.json")));
  CHECK(t.model == DurationModel::MEASURED);
  REQUIRE(t.sessions.size() == 2);

  const ConnectionSession& first = t.sessions[0];
  CHECK(first.conn_id == "n30");
  CHECK(first.open_ms == doctest::Approx(10));   // begins at tick 1010, capture starts 1000
  CHECK(first.close_ms == doctest::Approx(500)); // ends at tick 1500
  CHECK(first.endpoint.str() == "198.51.100.5:443");
  CHECK(first.initial_origin.host.str() == "site-a.test");
  CHECK(first.certificate.issuer_org == "Fixture CA");
  REQUIRE(first.requests.size() == 1);
  CHECK(first.requests[0].url == "https://site-a.test/");
  CHECK(first.requests[0].status == 200);
  CHECK(first.credentials() == CredentialsHint::INCLUDED);

  const ConnectionSession& second = t.sessions[1];
  CHECK(second.conn_id == "n40");
  CHECK(second.close_ms == kOpenForever);  // no end event before capture end
  CHECK(second.credentials() == CredentialsHint::OMITTED);
}

TEST_CASE("privacy-mode twins classify as CRED under measured lifetimes") {
  SessionTimeline t = stitch_sessions(parse_netlog(fixture("two_sessions.netlog.json")));
  PageFindings follow = analyze_page(t, FetchMode::FOLLOW_FETCH);
  REQUIRE(follow.findings.size() == 1);
  CHECK(follow.findings[0].conn_id == "n40");
  CHECK(follow.findings[0].causes.at(Cause::CRED) == std::vector<ConnId>{"n30"});

  // The hints differ, so the counterfactual keeps the attribution.
  PageFindings ignore = analyze_page(t, FetchMode::IGNORE_FETCH);
  REQUIRE(ignore.findings.size() == 1);
  CHECK(ignore.findings[0].causes.count(Cause::CRED) == 1);
}

TEST_CASE("every request binds to exactly one session") {
  SessionTimeline t = stitch_sessions(parse_netlog(fixture("two_sessions.netlog.json")));
  std::set<std::string> seen;
  size_t bound = 0;
  for (const ConnectionSession& s : t.sessions)
    for (const RequestEvent& r : s.requests) {
      CHECK(seen.insert(r.request_id).second);
      ++bound;
    }
  CHECK(bound == 2);
  CHECK(t.warnings.unbound_requests == 0);
}

TEST_CASE("sessions without a socket or certificate are dropped and tallied") {
  std::string doc = R"({
    "constants": {
      "logEventTypes": {"HTTP2_SESSION": 200},
      "logSourceType": {"HTTP2_SESSION": 2},
      "logEventPhase": {"PHASE_BEGIN": 1, "PHASE_END": 2}
    },
    "events": [
      {"phase": 1, "source": {"id": 5, "type": 2}, "time": "100", "type": 200,
       "params": {"host": "lonely.test:443"}}
    ]
  })";
  SessionTimeline t = stitch_sessions(parse_netlog(doc));
  CHECK(t.sessions.empty());
  CHECK(t.warnings.dropped_sessions == 1);
}

TEST_CASE("measured lifetime statistics cover closed fraction and median") {
  SessionTimeline t = stitch_sessions(parse_netlog(fixture("two_sessions.netlog.json")));
  REQUIRE(t.lifetimes.has_value());
  CHECK(t.lifetimes->total_sessions == 2);
  CHECK(t.lifetimes->closed_sessions == 1);
  CHECK(t.lifetimes->closed_fraction() == doctest::Approx(0.5));
  CHECK(t.lifetimes->median_closed_lifetime_ms == doctest::Approx(490));
}

TEST_CASE("event-name mappings load from JSON and validate") {
  EventNameMap map = EventNameMap::from_json(nlohmann::json::parse(R"({
    "version": "test-1",
    "source_types": {"session": "S", "socket": "K", "request": "R"},
    "events": {"session_lifetime": "SL", "request_bound": ["B1", "B2"]}
  })"));
  CHECK(map.version == "test-1");
  CHECK(map.session_source == "S");
  CHECK(map.request_bound_events == std::vector<std::string>{"B1", "B2"});

  CHECK_THROWS_AS(EventNameMap::from_json(nlohmann::json::parse("{}")), ConfigError);
  CHECK(EventNameMap::builtin().version == "cr87-1");
}
