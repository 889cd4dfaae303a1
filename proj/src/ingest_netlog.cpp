#include "h2reuse/ingest_netlog.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <regex>

namespace h2reuse {

using nlohmann::json;

namespace {

constexpr std::string_view kBuiltinMap = R"({
  "version": "cr87-1",
  "source_types": {
    "session": "HTTP2_SESSION",
    "socket": "SOCKET",
    "request": "URL_REQUEST"
  },
  "events": {
    "session_lifetime": "HTTP2_SESSION",
    "session_init": "HTTP2_SESSION_INITIALIZED",
    "socket_connect": "TCP_CONNECT",
    "tls_handshake": "SSL_HANDSHAKE_COMPLETE",
    "request_start": "URL_REQUEST_START_JOB",
    "request_bound": [
      "HTTP2_SESSION_POOL_FOUND_EXISTING_SESSION",
      "HTTP2_SESSION_POOL_IMPORTED_SESSION_FROM_SOCKET",
      "HTTP2_SESSION_POOL_CREATED_NEW_SESSION"
    ],
    "response_headers": "HTTP_TRANSACTION_READ_RESPONSE_HEADERS"
  }
})";

double parse_time_field(const json& v) {
  if (v.is_string()) {
    try {
      return std::stod(v.get<std::string>());
    } catch (const std::exception&) {
      throw ParseError("unparseable event time: '" + v.get<std::string>() + "'");
    }
  }
  if (v.is_number()) return v.get<double>();
  throw ParseError("event time is neither string nor number");
}

// Extracts top-level JSON objects from a possibly unterminated array
// body, stopping at the first incomplete one.
std::vector<json> salvage_objects(std::string_view body) {
  std::vector<json> out;
  size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && body[i] != '{') ++i;
    if (i >= body.size()) break;
    size_t start = i;
    int depth = 0;
    bool in_string = false, escaped = false, complete = false;
    for (; i < body.size(); ++i) {
      char c = body[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          ++i;
          complete = true;
          break;
        }
      }
    }
    if (!complete) break;
    try {
      out.push_back(json::parse(body.substr(start, i - start)));
    } catch (const json::parse_error&) {
      break;
    }
  }
  return out;
}

// Inverted constants table: numeric code -> symbolic name.
std::map<int64_t, std::string> invert_table(const json& table) {
  std::map<int64_t, std::string> out;
  for (auto it = table.begin(); it != table.end(); ++it)
    if (it.value().is_number_integer()) out[it.value().get<int64_t>()] = it.key();
  return out;
}

struct Constants {
  std::map<int64_t, std::string> event_types;
  std::map<int64_t, std::string> source_types;
  int64_t phase_begin = 1;
  int64_t phase_end = 2;
};

Constants read_constants(const json& constants) {
  if (!constants.is_object() || !constants.contains("logEventTypes") ||
      !constants.contains("logSourceType"))
    throw ParseError("constants section missing event/source tables");
  Constants c;
  c.event_types = invert_table(constants["logEventTypes"]);
  c.source_types = invert_table(constants["logSourceType"]);
  if (auto it = constants.find("logEventPhase"); it != constants.end() && it->is_object()) {
    if (auto b = it->find("PHASE_BEGIN"); b != it->end() && b->is_number_integer())
      c.phase_begin = b->get<int64_t>();
    if (auto e = it->find("PHASE_END"); e != it->end() && e->is_number_integer())
      c.phase_end = e->get<int64_t>();
  }
  return c;
}

std::string resolve_name(const std::map<int64_t, std::string>& table, int64_t code,
                         size_t& unknown_counter) {
  auto it = table.find(code);
  if (it != table.end()) return it->second;
  ++unknown_counter;
  return "UNKNOWN_" + std::to_string(code);
}

EventRecord decode_event(const json& e, const Constants& c, IngestWarnings& warnings) {
  EventRecord rec;
  if (auto src = e.find("source"); src != e.end() && src->is_object()) {
    rec.source_id = src->value("id", 0u);
    if (auto t = src->find("type"); t != src->end() && t->is_number_integer())
      rec.source_type = resolve_name(c.source_types, t->get<int64_t>(), warnings.unknown_codes);
  }
  if (auto t = e.find("type"); t != e.end() && t->is_number_integer())
    rec.event_type = resolve_name(c.event_types, t->get<int64_t>(), warnings.unknown_codes);
  else if (auto ts = e.find("type"); ts != e.end() && ts->is_string())
    rec.event_type = ts->get<std::string>();
  if (auto p = e.find("phase"); p != e.end() && p->is_number_integer()) {
    int64_t v = p->get<int64_t>();
    rec.phase = v == c.phase_begin   ? EventPhase::BEGIN
                : v == c.phase_end   ? EventPhase::END
                                     : EventPhase::NONE;
  }
  if (auto t = e.find("time"); t != e.end()) rec.time_ms = parse_time_field(*t);
  if (auto p = e.find("params"); p != e.end()) rec.params = *p;
  return rec;
}

const json* walk(const json& node, std::initializer_list<const char*> path) {
  const json* cur = &node;
  for (const char* key : path) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(key);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

std::optional<int> status_from_headers(const json& params) {
  const json* headers = walk(params, {"headers"});
  if (!headers || !headers->is_array() || headers->empty()) return std::nullopt;
  if (!(*headers)[0].is_string()) return std::nullopt;
  static const std::regex status_line(R"(HTTP/\S+\s+(\d{3}))");
  std::smatch m;
  const std::string& line = (*headers)[0].get_ref<const std::string&>();
  if (std::regex_search(line, m, status_line)) return std::stoi(m[1].str());
  return std::nullopt;
}

}  // namespace

const EventNameMap& EventNameMap::builtin() {
  static const EventNameMap map = from_json(json::parse(kBuiltinMap));
  return map;
}

EventNameMap EventNameMap::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("source_types") || !doc.contains("events"))
    throw ConfigError("event-name mapping needs source_types and events sections");
  EventNameMap m;
  m.version = doc.value("version", "unversioned");
  const json& src = doc["source_types"];
  m.session_source = src.value("session", "HTTP2_SESSION");
  m.socket_source = src.value("socket", "SOCKET");
  m.request_source = src.value("request", "URL_REQUEST");
  const json& ev = doc["events"];
  m.session_lifetime_event = ev.value("session_lifetime", "HTTP2_SESSION");
  m.session_init_event = ev.value("session_init", "HTTP2_SESSION_INITIALIZED");
  m.socket_connect_event = ev.value("socket_connect", "TCP_CONNECT");
  m.tls_handshake_event = ev.value("tls_handshake", "SSL_HANDSHAKE_COMPLETE");
  m.request_start_event = ev.value("request_start", "URL_REQUEST_START_JOB");
  m.response_headers_event = ev.value("response_headers", "HTTP_TRANSACTION_READ_RESPONSE_HEADERS");
  if (auto it = ev.find("request_bound"); it != ev.end() && it->is_array())
    for (const json& name : *it)
      if (name.is_string()) m.request_bound_events.push_back(name.get<std::string>());
  if (m.request_bound_events.empty())
    throw ConfigError("event-name mapping lists no request binding events");
  return m;
}

EventNameMap EventNameMap::load_file(const std::string& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("bad event-name mapping " + path + ": " + e.what());
  }
}

NetlogDocument parse_netlog(std::string_view document) {
  NetlogDocument out;
  json doc;
  bool salvaged = false;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error&) {
    salvaged = true;
  }

  Constants constants;
  std::vector<json> raw_events;
  if (!salvaged) {
    if (!doc.is_object() || !doc.contains("constants"))
      throw ParseError("log has no constants section");
    constants = read_constants(doc["constants"]);
    if (auto ev = doc.find("events"); ev != doc.end() && ev->is_array())
      raw_events.assign(ev->begin(), ev->end());
  } else {
    // Logs cut off mid-capture lack the closing brackets. Recover the
    // constants object and every complete event before the cut.
    size_t cpos = document.find("\"constants\"");
    if (cpos == std::string_view::npos) throw ParseError("log has no constants section");
    size_t cobj = document.find('{', cpos + 11);
    if (cobj == std::string_view::npos) throw ParseError("log has no constants section");
    std::vector<json> cparsed = salvage_objects(document.substr(cobj));
    if (cparsed.empty()) throw ParseError("constants section unreadable");
    constants = read_constants(cparsed.front());

    size_t epos = document.find("\"events\"");
    if (epos != std::string_view::npos) {
      size_t arr = document.find('[', epos + 8);
      if (arr != std::string_view::npos)
        raw_events = salvage_objects(document.substr(arr + 1));
    }
    ++out.warnings.truncated_tail;
  }

  out.events.reserve(raw_events.size());
  for (const json& e : raw_events) {
    if (!e.is_object()) continue;
    out.events.push_back(decode_event(e, constants, out.warnings));
  }
  return out;
}

namespace {

struct SocketInfo {
  std::optional<Endpoint> endpoint;
  std::optional<Certificate> certificate;
};

struct RequestInfo {
  uint32_t source_id = 0;
  bool seen = false;
  std::string url;
  std::string method = "GET";
  double start_ms = 0;
  double end_ms = 0;
  std::optional<uint32_t> session_id;
  std::optional<int> status;
};

std::optional<uint32_t> dependency_id(const json& params) {
  const json* id = walk(params, {"source_dependency", "id"});
  if (id && id->is_number_integer()) return id->get<uint32_t>();
  return std::nullopt;
}

std::optional<Certificate> certificate_from_params(const json& params,
                                                   IngestWarnings& warnings) {
  const json* sans = walk(params, {"san_dns_names"});
  if (!sans || !sans->is_array()) return std::nullopt;
  Certificate cert;
  if (const json* issuer = walk(params, {"issuer_organization"});
      issuer && issuer->is_string())
    cert.issuer_org = issuer->get<std::string>();
  if (const json* cn = walk(params, {"subject_name"}); cn && cn->is_string())
    cert.subject_cn = cn->get<std::string>();
  for (const json& raw : *sans) {
    if (!raw.is_string()) continue;
    if (auto p = SanPattern::parse(raw.get<std::string>()))
      cert.san_dns_names.push_back(std::move(*p));
    else
      ++warnings.bad_sans_ignored;
  }
  if (cert.san_dns_names.empty()) return std::nullopt;
  return cert;
}

}  // namespace

SessionTimeline stitch_sessions(const NetlogDocument& doc, const EventNameMap& names) {
  SessionTimeline timeline;
  timeline.model = DurationModel::MEASURED;
  timeline.warnings = doc.warnings;

  double t0 = 0;
  bool have_t0 = false;
  for (const EventRecord& e : doc.events) {
    if (!have_t0 || e.time_ms < t0) {
      t0 = e.time_ms;
      have_t0 = true;
    }
  }
  auto rel = [&](double t) { return t - t0; };

  std::map<uint32_t, SocketInfo> sockets;
  std::map<uint32_t, RequestInfo> requests;

  struct SessionInfo {
    uint32_t source_id = 0;
    std::optional<Origin> origin;
    std::optional<uint32_t> socket_id;
    double open_ms = 0;
    bool has_open = false;
    double close_ms = kOpenForever;
    CredentialsHint credentials = CredentialsHint::UNKNOWN;
  };
  std::map<uint32_t, SessionInfo> sessions;

  auto is_bound_event = [&](const std::string& type) {
    return std::find(names.request_bound_events.begin(), names.request_bound_events.end(),
                     type) != names.request_bound_events.end();
  };

  for (const EventRecord& e : doc.events) {
    if (e.source_type == names.socket_source) {
      SocketInfo& sock = sockets[e.source_id];
      if (e.event_type == names.socket_connect_event && !sock.endpoint) {
        if (const json* addr = walk(e.params, {"remote_address"}); addr && addr->is_string()) {
          try {
            sock.endpoint = Endpoint::parse(addr->get<std::string>());
          } catch (const ParseError&) {
          }
        }
      } else if (e.event_type == names.tls_handshake_event && !sock.certificate) {
        sock.certificate = certificate_from_params(e.params, timeline.warnings);
      }
    } else if (e.source_type == names.session_source) {
      SessionInfo& sess = sessions[e.source_id];
      sess.source_id = e.source_id;
      if (e.event_type == names.session_lifetime_event) {
        if (e.phase == EventPhase::BEGIN) {
          if (!sess.has_open) {
            sess.open_ms = rel(e.time_ms);
            sess.has_open = true;
          }
          if (const json* host = walk(e.params, {"host"}); host && host->is_string()) {
            try {
              std::string text = host->get<std::string>();
              size_t colon = text.rfind(':');
              uint16_t port = 443;
              std::string hostname = text;
              if (colon != std::string::npos) {
                hostname = text.substr(0, colon);
                port = static_cast<uint16_t>(std::stoi(text.substr(colon + 1)));
              }
              sess.origin = Origin{DnsName::parse(hostname), port};
            } catch (const Error&) {
            }
          }
          if (const json* pm = walk(e.params, {"privacy_mode"})) {
            if (pm->is_boolean())
              sess.credentials =
                  pm->get<bool>() ? CredentialsHint::OMITTED : CredentialsHint::INCLUDED;
            else if (pm->is_string())
              sess.credentials = pm->get<std::string>() == "enabled" ? CredentialsHint::OMITTED
                                                                     : CredentialsHint::INCLUDED;
          }
        } else if (e.phase == EventPhase::END) {
          sess.close_ms = rel(e.time_ms);
        }
      } else if (e.event_type == names.session_init_event) {
        if (auto dep = dependency_id(e.params)) sess.socket_id = *dep;
      }
      if (!sess.has_open) {
        sess.open_ms = rel(e.time_ms);
        sess.has_open = true;
      }
    } else if (e.source_type == names.request_source) {
      RequestInfo& req = requests[e.source_id];
      if (!req.seen) {
        req.seen = true;
        req.source_id = e.source_id;
        req.start_ms = rel(e.time_ms);
      }
      req.end_ms = std::max(req.end_ms, rel(e.time_ms));
      if (e.event_type == names.request_start_event) {
        if (const json* url = walk(e.params, {"url"}); url && url->is_string())
          req.url = url->get<std::string>();
        if (const json* m = walk(e.params, {"method"}); m && m->is_string())
          req.method = m->get<std::string>();
        req.start_ms = rel(e.time_ms);
      } else if (is_bound_event(e.event_type)) {
        if (auto dep = dependency_id(e.params)) req.session_id = *dep;
      } else if (e.event_type == names.response_headers_event) {
        if (auto status = status_from_headers(e.params)) req.status = *status;
      }
    }
  }

  // Assemble sessions; requests attach via their binding dependency.
  std::map<uint32_t, std::vector<const RequestInfo*>> by_session;
  for (const auto& [id, req] : requests) {
    if (req.session_id && sessions.count(*req.session_id) != 0)
      by_session[*req.session_id].push_back(&req);
    else
      ++timeline.warnings.unbound_requests;
  }

  for (const auto& [id, sess] : sessions) {
    const SocketInfo* sock =
        sess.socket_id && sockets.count(*sess.socket_id) ? &sockets.at(*sess.socket_id) : nullptr;
    auto reqs_it = by_session.find(id);
    if (!sock || !sock->endpoint || !sock->certificate || !sess.origin ||
        reqs_it == by_session.end() || reqs_it->second.empty()) {
      ++timeline.warnings.dropped_sessions;
      continue;
    }

    ConnectionSession session;
    session.conn_id = "n" + std::to_string(id);
    session.endpoint = *sock->endpoint;
    session.certificate = *sock->certificate;
    session.initial_origin = *sess.origin;
    session.open_ms = sess.open_ms;
    session.close_ms = sess.close_ms;

    for (const RequestInfo* req : reqs_it->second) {
      RequestEvent event;
      event.request_id = "r" + std::to_string(req->source_id);
      event.start_ms = req->start_ms;
      event.duration_ms = std::max(0.0, req->end_ms - req->start_ms);
      event.method = req->method;
      event.url = req->url;
      try {
        event.origin = origin_of(req->url);
      } catch (const Error&) {
      }
      event.protocol = Protocol::H2;
      event.status = req->status.value_or(0);
      event.server_endpoint = session.endpoint;
      event.socket_id = sess.socket_id.value_or(0);
      event.credentials = sess.credentials;
      if (event.status == 421 && event.origin)
        session.excluded_domains.insert(event.origin->host);
      session.requests.push_back(std::move(event));
    }
    std::sort(session.requests.begin(), session.requests.end(),
              [](const RequestEvent& a, const RequestEvent& b) {
                if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
                return a.request_id < b.request_id;
              });
    if (timeline.page_url.empty() && !session.requests.front().url.empty())
      timeline.page_url = session.requests.front().url;
    timeline.sessions.push_back(std::move(session));
  }

  std::sort(timeline.sessions.begin(), timeline.sessions.end(),
            [](const ConnectionSession& a, const ConnectionSession& b) {
              return opens_before(a, b);
            });

  LifetimeStats stats;
  stats.total_sessions = timeline.sessions.size();
  std::vector<double> closed_lifetimes;
  for (const ConnectionSession& s : timeline.sessions) {
    if (!std::isinf(s.close_ms)) {
      ++stats.closed_sessions;
      closed_lifetimes.push_back(s.close_ms - s.open_ms);
    }
  }
  if (!closed_lifetimes.empty()) {
    std::sort(closed_lifetimes.begin(), closed_lifetimes.end());
    size_t n = closed_lifetimes.size();
    stats.median_closed_lifetime_ms =
        n % 2 == 1 ? closed_lifetimes[n / 2]
                   : 0.5 * (closed_lifetimes[n / 2 - 1] + closed_lifetimes[n / 2]);
  }
  timeline.lifetimes = stats;
  return timeline;
}

SessionTimeline ingest_netlog_file(const std::string& path, const EventNameMap& names) {
  NetlogDocument doc;
  try {
    doc = parse_netlog(read_file_maybe_gzip(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
  SessionTimeline timeline = stitch_sessions(doc, names);
  if (timeline.page_url.empty())
    timeline.page_url = std::filesystem::path(path).stem().string();
  return timeline;
}

}  // namespace h2reuse
