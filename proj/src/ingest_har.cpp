#include "h2reuse/ingest_har.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <json.hpp>

namespace h2reuse {

using nlohmann::json;

namespace {

// RFC 7231 token characters, the set valid in a request method.
bool is_token_char(char c) {
  static constexpr std::string_view extra = "!#$%&'*+-.^_`|~";
  return std::isalnum(static_cast<unsigned char>(c)) ||
         extra.find(c) != std::string_view::npos;
}

bool valid_method(const std::string& m) {
  if (m.empty()) return false;
  return std::all_of(m.begin(), m.end(), is_token_char);
}

// Protocol recognition; unrecognized strings stay OTHER.
std::pair<Protocol, bool> classify_version(std::string_view version) {
  std::string v = to_lower_ascii(trim(version));
  if (v == "h2" || v == "http/2" || v == "http/2.0" || v == "h2c") return {Protocol::H2, true};
  if (v == "http/1.1" || v == "http/1.0" || v == "http/1" || v == "h1") return {Protocol::H1, true};
  if (v == "http/3" || v == "http/3.0" || v.rfind("h3", 0) == 0) return {Protocol::H3, true};
  if (v == "spdy/3.1" || v == "spdy/3") return {Protocol::OTHER, true};
  return {Protocol::OTHER, false};
}

const json* walk_path(const json& entry, const std::string& dotted) {
  const json* node = &entry;
  for (const std::string& key : split(dotted, '.')) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(key);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

bool looks_like_ip(std::string_view s) {
  try {
    IpAddress::parse(s);
    return true;
  } catch (const ParseError&) {
    return false;
  }
}

// Returns nullopt when the section is present but unusable, which
// invalidates the whole file.
std::optional<Certificate> parse_security_details(const json& sec, IngestWarnings& warnings,
                                                  bool& structurally_invalid) {
  if (!sec.is_object()) {
    structurally_invalid = true;
    return std::nullopt;
  }
  Certificate cert;
  if (auto it = sec.find("issuer"); it != sec.end() && it->is_string())
    cert.issuer_org = it->get<std::string>();
  if (auto it = sec.find("subjectName"); it != sec.end() && it->is_string())
    cert.subject_cn = it->get<std::string>();
  auto san_it = sec.find("sanList");
  if (san_it == sec.end() || !san_it->is_array()) {
    structurally_invalid = true;
    return std::nullopt;
  }
  for (const json& raw : *san_it) {
    if (!raw.is_string()) {
      structurally_invalid = true;
      return std::nullopt;
    }
    std::string s = raw.get<std::string>();
    if (auto pattern = SanPattern::parse(s)) {
      cert.san_dns_names.push_back(std::move(*pattern));
    } else if (looks_like_ip(trim(s))) {
      ++warnings.ip_sans_ignored;
    } else {
      ++warnings.bad_sans_ignored;
    }
  }
  if (cert.san_dns_names.empty()) return std::nullopt;  // counts as missing
  return cert;
}

uint64_t parse_socket_id(const json& entry, bool& present) {
  present = false;
  auto it = entry.find("connection");
  if (it == entry.end()) return 0;
  if (it->is_string()) {
    const std::string& s = it->get_ref<const std::string&>();
    if (s.empty()) return 0;
    uint64_t v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return 0;  // unparseable ids group with socket 0
      v = v * 10 + static_cast<uint64_t>(c - '0');
    }
    present = true;
    return v;
  }
  if (it->is_number_unsigned()) {
    present = true;
    return it->get<uint64_t>();
  }
  return 0;
}

}  // namespace

HarPage load_har(std::string_view document, const HarOptions& options) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError("HAR parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("log") || !doc["log"].is_object())
    throw ParseError("document is not a HAR log");
  const json& log = doc["log"];

  HarPage page;
  std::map<std::string, std::string> page_ids;  // id -> title
  if (auto pages = log.find("pages"); pages != log.end() && pages->is_array()) {
    for (const json& p : *pages) {
      if (!p.is_object()) continue;
      std::string id = p.value("id", "");
      std::string title = p.value("title", "");
      if (!id.empty()) page_ids.emplace(id, title);
      if (page.page_url.empty() && title.rfind("http", 0) == 0) page.page_url = title;
    }
  }

  auto entries_it = log.find("entries");
  if (entries_it == log.end() || !entries_it->is_array() || entries_it->empty())
    return page;  // empty-page case; caller may warn

  // Navigation start: the first page's start, else the earliest entry.
  double nav_start_ms = 0;
  bool have_nav_start = false;
  if (auto pages = log.find("pages"); pages != log.end() && pages->is_array() &&
                                      !pages->empty() && (*pages)[0].is_object()) {
    if (auto st = (*pages)[0].find("startedDateTime"); st != (*pages)[0].end() && st->is_string()) {
      nav_start_ms = parse_iso8601_ms(st->get<std::string>());
      have_nav_start = true;
    }
  }
  if (!have_nav_start) {
    for (const json& e : *entries_it) {
      if (!e.is_object()) continue;
      if (auto st = e.find("startedDateTime"); st != e.end() && st->is_string()) {
        double t = parse_iso8601_ms(st->get<std::string>());
        if (!have_nav_start || t < nav_start_ms) {
          nav_start_ms = t;
          have_nav_start = true;
        }
      }
    }
  }

  for (const json& e : *entries_it) {
    if (!e.is_object()) continue;
    HarEntry entry;

    if (auto it = e.find("_request_id"); it != e.end() && it->is_string())
      entry.request_id = it->get<std::string>();
    else if (auto it2 = e.find("_requestId"); it2 != e.end() && it2->is_string())
      entry.request_id = it2->get<std::string>();

    entry.page_ref = e.value("pageref", "");
    entry.page_ref_known = page_ids.empty()
                               ? true  // no pages section: nothing to validate against
                               : (entry.page_ref.empty() || page_ids.count(entry.page_ref) != 0);

    if (auto it = e.find("startedDateTime"); it != e.end() && it->is_string())
      entry.start_ms = std::max(0.0, parse_iso8601_ms(it->get<std::string>()) - nav_start_ms);
    if (auto it = e.find("time"); it != e.end() && it->is_number())
      entry.duration_ms = std::max(0.0, it->get<double>());

    if (auto req = e.find("request"); req != e.end() && req->is_object()) {
      entry.method = req->value("method", "");
      entry.url = req->value("url", "");
      if (entry.http_version.empty()) entry.http_version = req->value("httpVersion", "");
    }
    if (auto resp = e.find("response"); resp != e.end() && resp->is_object()) {
      if (auto st = resp->find("status"); st != resp->end() && st->is_number_integer())
        entry.status = st->get<int>();
      std::string rv = resp->value("httpVersion", "");
      if (!rv.empty()) entry.http_version = rv;
    }
    std::tie(entry.protocol, entry.version_recognized) = classify_version(entry.http_version);

    if (auto it = e.find("serverIPAddress"); it != e.end() && it->is_string()) {
      std::string ip_text = it->get<std::string>();
      if (!ip_text.empty()) {
        // Some exporters bracket v6 addresses here.
        if (ip_text.front() == '[' && ip_text.back() == ']')
          ip_text = ip_text.substr(1, ip_text.size() - 2);
        try {
          uint16_t port = 443;
          if (auto url_origin = [&]() -> std::optional<Origin> {
                try {
                  return origin_of(entry.url);
                } catch (const Error&) {
                  return std::nullopt;
                }
              }())
            port = url_origin->port;
          entry.server_endpoint = Endpoint{IpAddress::parse(ip_text), port};
        } catch (const ParseError&) {
          // Unparseable address: same as missing.
        }
      }
    }

    entry.socket_id = parse_socket_id(e, entry.socket_id_present);

    if (const json* sec = walk_path(e, options.cert_path)) {
      bool structurally_invalid = false;
      entry.certificate = parse_security_details(*sec, entry.warnings, structurally_invalid);
      if (structurally_invalid) page.invalid_certificate_file = true;
    }

    page.entries.push_back(std::move(entry));
  }

  if (page.page_url.empty()) {
    for (const HarEntry& e : page.entries) {
      if (!e.url.empty()) {
        page.page_url = e.url;
        break;
      }
    }
  }
  return page;
}

std::pair<std::vector<HarEntry>, FilterStats> filter_requests(const std::vector<HarEntry>& entries) {
  std::vector<HarEntry> kept;
  FilterStats stats;
  for (const HarEntry& e : entries) {
    if (e.socket_id == 0) {
      ++stats.socket_id_zero;
    } else if (!e.server_endpoint) {
      ++stats.missing_ip;
    } else if (!valid_method(e.method)) {
      ++stats.invalid_method;
    } else if (!e.version_recognized) {
      ++stats.invalid_version;
    } else if (e.status < 100 || e.status > 599) {
      ++stats.invalid_status;
    } else if (!e.page_ref_known) {
      ++stats.bad_page_ref;
    } else if (!e.certificate) {
      ++stats.missing_certificate;
    } else if (e.protocol != Protocol::H2) {
      ++stats.non_h2_protocol;
    } else if (e.request_id.empty()) {
      ++stats.missing_request_id;
    } else if ([&] {
                 try {
                   origin_of(e.url);
                   return false;
                 } catch (const Error&) {
                   return true;
                 }
               }()) {
      ++stats.invalid_url;
    } else {
      kept.push_back(e);
    }
  }
  return {std::move(kept), stats};
}

SessionTimeline reconstruct_sessions(const HarPage& page, std::vector<HarEntry> kept,
                                     FilterStats filters, DurationModel model) {
  if (model == DurationModel::MEASURED)
    throw ConfigError("HAR input carries no measured lifetimes");

  SessionTimeline timeline;
  timeline.page_url = page.page_url;
  timeline.model = model;
  timeline.filters = filters;
  for (const HarEntry& e : kept) timeline.warnings += e.warnings;

  std::stable_sort(kept.begin(), kept.end(), [](const HarEntry& a, const HarEntry& b) {
    if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
    return a.request_id < b.request_id;
  });

  std::map<uint64_t, std::vector<const HarEntry*>> by_socket;
  for (const HarEntry& e : kept) by_socket[e.socket_id].push_back(&e);

  for (const auto& [socket_id, socket_entries] : by_socket) {
    const HarEntry& first = *socket_entries.front();
    size_t deviating = 0;
    for (const HarEntry* e : socket_entries)
      if (*e->server_endpoint != *first.server_endpoint) ++deviating;
    if (deviating > 0) {
      // One inconsistency per socket; the whole session is untrustworthy.
      ++timeline.filters.inconsistent_ip;
      continue;
    }

    ConnectionSession session;
    session.conn_id = "s" + std::to_string(socket_id);
    session.endpoint = *first.server_endpoint;
    session.initial_origin = origin_of(first.url);
    session.certificate = *first.certificate;
    session.open_ms = first.start_ms;
    double last_end = 0;
    for (const HarEntry* e : socket_entries) {
      if (*e->certificate != *first.certificate) ++timeline.warnings.cert_conflicts;
      RequestEvent req;
      req.request_id = e->request_id;
      req.page_ref = e->page_ref;
      req.start_ms = e->start_ms;
      req.duration_ms = e->duration_ms;
      req.method = e->method;
      req.url = e->url;
      req.origin = origin_of(e->url);
      req.protocol = e->protocol;
      req.status = e->status;
      req.server_endpoint = e->server_endpoint;
      req.socket_id = e->socket_id;
      req.credentials = CredentialsHint::UNKNOWN;  // HAR does not record it
      last_end = std::max(last_end, req.end_ms());
      if (req.status == 421) session.excluded_domains.insert(req.origin->host);
      session.requests.push_back(std::move(req));
    }
    session.close_ms = model == DurationModel::ENDLESS ? kOpenForever : last_end;
    timeline.sessions.push_back(std::move(session));
  }

  std::sort(timeline.sessions.begin(), timeline.sessions.end(),
            [](const ConnectionSession& a, const ConnectionSession& b) {
              return opens_before(a, b);
            });
  return timeline;
}

SessionTimeline ingest_har(std::string_view document, const HarOptions& options) {
  HarPage page = load_har(document, options);
  if (page.invalid_certificate_file) {
    SessionTimeline timeline;
    timeline.page_url = page.page_url;
    timeline.model = options.model;
    timeline.filters.invalid_certificate_file = 1;
    return timeline;
  }
  auto [kept, stats] = filter_requests(page.entries);
  return reconstruct_sessions(page, std::move(kept), stats, options.model);
}

SessionTimeline ingest_har_file(const std::string& path, const HarOptions& options) {
  try {
    return ingest_har(read_file_maybe_gzip(path), options);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace h2reuse
