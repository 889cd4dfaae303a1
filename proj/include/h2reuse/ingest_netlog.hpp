#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "h2reuse/model.hpp"
#include "h2reuse/timeline.hpp"

namespace h2reuse {

enum class EventPhase { BEGIN, END, NONE };

// One decoded event-log entry with symbolic names resolved through the
// log's constants section.
struct EventRecord {
  uint32_t source_id = 0;
  std::string source_type;
  std::string event_type;
  EventPhase phase = EventPhase::NONE;
  double time_ms = 0;
  nlohmann::json params;
};

// Which event/source names carry the lifecycle information. Browsers
// rename and renumber these across versions, so the mapping ships with
// the tool and can be overridden per deployment.
struct EventNameMap {
  std::string version;
  std::string session_source;
  std::string socket_source;
  std::string request_source;
  std::string session_lifetime_event;  // begin/end bound the session
  std::string session_init_event;      // carries the socket dependency
  std::string socket_connect_event;    // carries remote_address
  std::string tls_handshake_event;     // carries issuer + SAN list
  std::string request_start_event;     // carries url + method
  std::vector<std::string> request_bound_events;  // carry the session dependency
  std::string response_headers_event;  // carries the status line

  // The mapping compiled into this build.
  static const EventNameMap& builtin();
  static EventNameMap from_json(const nlohmann::json& doc);
  static EventNameMap load_file(const std::string& path);
};

struct NetlogDocument {
  std::vector<EventRecord> events;
  IngestWarnings warnings;  // unknown codes, salvaged tail
};

// Decodes a NetLog-style JSON document. The constants section is
// mandatory; unknown numeric codes become "UNKNOWN_<n>" and are
// counted. A document cut off mid-array is salvaged up to the last
// complete event, with a warning.
NetlogDocument parse_netlog(std::string_view document);

// Stitches decoded events into measured-lifetime sessions: endpoint
// from the socket connect, certificate from the TLS handshake, open and
// close from the session source's begin/end, requests via the binding
// events. Sessions lacking a socket, certificate, or any request are
// dropped and tallied.
SessionTimeline stitch_sessions(const NetlogDocument& doc,
                                const EventNameMap& names = EventNameMap::builtin());

SessionTimeline ingest_netlog_file(const std::string& path,
                                   const EventNameMap& names = EventNameMap::builtin());

}  // namespace h2reuse
