#include "h2reuse/records.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace h2reuse {

using nlohmann::json;

PageAnalysis build_page_analysis(const SessionTimeline& timeline, FetchMode mode,
                                 const PageFindings& findings, const SimResult& sim) {
  PageAnalysis page;
  page.page_url = timeline.page_url;
  page.model = timeline.model;
  page.fetch = mode;
  page.filters = timeline.filters;
  page.warnings = timeline.warnings;
  page.lifetimes = timeline.lifetimes;
  page.port_mismatch_san_matches = findings.diagnostics.port_mismatch_san_matches;
  page.sim = SimSummary{sim.observed, sim.opened, sim.saved()};

  std::map<ConnId, const Finding*> by_conn;
  for (const Finding& f : findings.findings) by_conn.emplace(f.conn_id, &f);

  std::vector<const ConnectionSession*> order;
  for (const ConnectionSession& s : timeline.sessions) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const ConnectionSession* a, const ConnectionSession* b) {
              return opens_before(*a, *b);
            });

  for (const ConnectionSession* session : order) {
    ConnRecord rec;
    rec.conn_id = session->conn_id;
    rec.endpoint = session->endpoint;
    rec.origin = session->initial_origin;
    rec.issuer_org = session->certificate.issuer_org;
    rec.open_ms = session->open_ms;
    rec.close_ms = session->close_ms;
    rec.request_count = session->requests.size();
    rec.credentials = session->credentials();
    if (auto it = sim.mapping.find(session->conn_id); it != sim.mapping.end())
      rec.sim_conn = it->second;
    if (auto it = by_conn.find(session->conn_id); it != by_conn.end()) {
      const Finding& f = *it->second;
      for (const auto& [cause, witnesses] : f.causes) {
        CauseAttribution attribution;
        attribution.witnesses = witnesses;
        attribution.prev_origin = f.prev_origin_per_cause.at(cause);
        rec.causes.emplace(cause, std::move(attribution));
      }
      rec.dual_role_witnesses = f.dual_role_witnesses;
    }
    page.connections.push_back(std::move(rec));
  }
  return page;
}

namespace {

json filters_to_json(const FilterStats& f) {
  return json{{"socket_id_zero", f.socket_id_zero},
              {"missing_ip", f.missing_ip},
              {"inconsistent_ip", f.inconsistent_ip},
              {"invalid_method", f.invalid_method},
              {"invalid_version", f.invalid_version},
              {"invalid_status", f.invalid_status},
              {"bad_page_ref", f.bad_page_ref},
              {"missing_certificate", f.missing_certificate},
              {"non_h2_protocol", f.non_h2_protocol},
              {"missing_request_id", f.missing_request_id},
              {"invalid_url", f.invalid_url},
              {"invalid_certificate_file", f.invalid_certificate_file}};
}

FilterStats filters_from_json(const json& j) {
  FilterStats f;
  f.socket_id_zero = j.value("socket_id_zero", 0u);
  f.missing_ip = j.value("missing_ip", 0u);
  f.inconsistent_ip = j.value("inconsistent_ip", 0u);
  f.invalid_method = j.value("invalid_method", 0u);
  f.invalid_version = j.value("invalid_version", 0u);
  f.invalid_status = j.value("invalid_status", 0u);
  f.bad_page_ref = j.value("bad_page_ref", 0u);
  f.missing_certificate = j.value("missing_certificate", 0u);
  f.non_h2_protocol = j.value("non_h2_protocol", 0u);
  f.missing_request_id = j.value("missing_request_id", 0u);
  f.invalid_url = j.value("invalid_url", 0u);
  f.invalid_certificate_file = j.value("invalid_certificate_file", 0u);
  return f;
}

json warnings_to_json(const IngestWarnings& w) {
  return json{{"cert_conflicts", w.cert_conflicts},
              {"ip_sans_ignored", w.ip_sans_ignored},
              {"bad_sans_ignored", w.bad_sans_ignored},
              {"unknown_codes", w.unknown_codes},
              {"truncated_tail", w.truncated_tail},
              {"unbound_requests", w.unbound_requests},
              {"dropped_sessions", w.dropped_sessions}};
}

IngestWarnings warnings_from_json(const json& j) {
  IngestWarnings w;
  w.cert_conflicts = j.value("cert_conflicts", 0u);
  w.ip_sans_ignored = j.value("ip_sans_ignored", 0u);
  w.bad_sans_ignored = j.value("bad_sans_ignored", 0u);
  w.unknown_codes = j.value("unknown_codes", 0u);
  w.truncated_tail = j.value("truncated_tail", 0u);
  w.unbound_requests = j.value("unbound_requests", 0u);
  w.dropped_sessions = j.value("dropped_sessions", 0u);
  return w;
}

CredentialsHint credentials_from_name(std::string_view s) {
  if (s == "included") return CredentialsHint::INCLUDED;
  if (s == "omitted") return CredentialsHint::OMITTED;
  return CredentialsHint::UNKNOWN;
}

}  // namespace

std::string serialize_meta(const FindingsMeta& meta) {
  json j{{"kind", "meta"},
         {"tool", "h2reuse"},
         {"tool_version", meta.tool_version},
         {"map_version", meta.map_version},
         {"corpus", meta.corpus},
         {"model", duration_model_name(meta.model)},
         {"fetch", fetch_mode_name(meta.fetch)}};
  return j.dump() + "\n";
}

std::string serialize_page(const PageAnalysis& page) {
  std::ostringstream out;
  json pj{{"kind", "page"},
          {"page", page.page_url},
          {"conns", page.connections.size()},
          {"sim_observed", page.sim.observed},
          {"sim_opened", page.sim.opened},
          {"sim_saved", page.sim.saved},
          {"filters", filters_to_json(page.filters)},
          {"warnings", warnings_to_json(page.warnings)},
          {"port_mismatch_san", page.port_mismatch_san_matches}};
  if (page.lifetimes) {
    pj["lifetimes"] = json{{"total", page.lifetimes->total_sessions},
                           {"closed", page.lifetimes->closed_sessions},
                           {"median_closed_ms", page.lifetimes->median_closed_lifetime_ms}};
  }
  out << pj.dump() << "\n";

  for (const ConnRecord& rec : page.connections) {
    json cj{{"kind", "conn"},
            {"page", page.page_url},
            {"conn", rec.conn_id},
            {"ip", rec.endpoint.ip.str()},
            {"port", rec.endpoint.port},
            {"domain", rec.origin.host.str()},
            {"origin_port", rec.origin.port},
            {"issuer", rec.issuer_org},
            {"open_ms", rec.open_ms},
            {"requests", rec.request_count},
            {"credentials", credentials_name(rec.credentials)},
            {"sim", rec.sim_conn}};
    if (!std::isinf(rec.close_ms)) cj["close_ms"] = rec.close_ms;
    if (!rec.causes.empty()) {
      json causes = json::object();
      for (const auto& [cause, attribution] : rec.causes) {
        causes[cause_name(cause)] =
            json{{"witnesses", attribution.witnesses},
                 {"prev", attribution.prev_origin.host.str()},
                 {"prev_port", attribution.prev_origin.port}};
      }
      cj["causes"] = std::move(causes);
    }
    if (!rec.dual_role_witnesses.empty()) cj["flagged"] = rec.dual_role_witnesses;
    out << cj.dump() << "\n";
  }
  return std::move(out).str();
}

FindingsFile parse_findings(std::string_view content) {
  FindingsFile file;
  bool have_meta = false;
  PageAnalysis* current = nullptr;
  size_t line_no = 0;

  size_t pos = 0;
  while (pos < content.size()) {
    size_t eol = content.find('\n', pos);
    std::string_view line =
        content.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? content.size() : eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("findings line " + std::to_string(line_no) + ": " + e.what());
    }
    std::string kind = j.value("kind", "");
    if (kind == "meta") {
      file.meta.tool_version = j.value("tool_version", "");
      file.meta.map_version = j.value("map_version", "");
      file.meta.corpus = j.value("corpus", "");
      auto model = duration_model_from_name(j.value("model", ""));
      auto fetch = fetch_mode_from_name(j.value("fetch", ""));
      if (!model || !fetch)
        throw ParseError("findings line " + std::to_string(line_no) + ": bad meta");
      file.meta.model = *model;
      file.meta.fetch = *fetch;
      have_meta = true;
    } else if (kind == "page") {
      PageAnalysis page;
      page.page_url = j.value("page", "");
      page.model = file.meta.model;
      page.fetch = file.meta.fetch;
      page.sim.observed = j.value("sim_observed", 0u);
      page.sim.opened = j.value("sim_opened", 0u);
      page.sim.saved = j.value("sim_saved", 0u);
      if (auto it = j.find("filters"); it != j.end()) page.filters = filters_from_json(*it);
      if (auto it = j.find("warnings"); it != j.end()) page.warnings = warnings_from_json(*it);
      page.port_mismatch_san_matches = j.value("port_mismatch_san", 0u);
      if (auto it = j.find("lifetimes"); it != j.end() && it->is_object()) {
        LifetimeStats stats;
        stats.total_sessions = it->value("total", 0u);
        stats.closed_sessions = it->value("closed", 0u);
        stats.median_closed_lifetime_ms = it->value("median_closed_ms", 0.0);
        page.lifetimes = stats;
      }
      file.pages.push_back(std::move(page));
      current = &file.pages.back();
    } else if (kind == "conn") {
      if (!current)
        throw ParseError("findings line " + std::to_string(line_no) +
                         ": connection record before any page record");
      ConnRecord rec;
      rec.conn_id = j.value("conn", "");
      rec.endpoint = Endpoint{IpAddress::parse(j.value("ip", "")),
                              static_cast<uint16_t>(j.value("port", 0u))};
      rec.origin = Origin{DnsName::parse(j.value("domain", "")),
                          static_cast<uint16_t>(j.value("origin_port", 443u))};
      rec.issuer_org = j.value("issuer", "");
      rec.open_ms = j.value("open_ms", 0.0);
      rec.close_ms = j.contains("close_ms") ? j["close_ms"].get<double>() : kOpenForever;
      rec.request_count = j.value("requests", 0u);
      rec.credentials = credentials_from_name(j.value("credentials", "unknown"));
      rec.sim_conn = j.value("sim", "");
      if (auto causes = j.find("causes"); causes != j.end() && causes->is_object()) {
        for (auto it = causes->begin(); it != causes->end(); ++it) {
          auto cause = cause_from_name(it.key());
          if (!cause)
            throw ParseError("findings line " + std::to_string(line_no) + ": unknown cause '" +
                             it.key() + "'");
          CauseAttribution attribution;
          if (auto w = it.value().find("witnesses"); w != it.value().end() && w->is_array())
            for (const json& id : *w) attribution.witnesses.push_back(id.get<std::string>());
          attribution.prev_origin =
              Origin{DnsName::parse(it.value().value("prev", "")),
                     static_cast<uint16_t>(it.value().value("prev_port", 443u))};
          rec.causes.emplace(*cause, std::move(attribution));
        }
      }
      if (auto it = j.find("flagged"); it != j.end() && it->is_array())
        for (const json& id : *it) rec.dual_role_witnesses.push_back(id.get<std::string>());
      current->connections.push_back(std::move(rec));
    } else {
      throw ParseError("findings line " + std::to_string(line_no) + ": unknown record kind '" +
                       kind + "'");
    }
  }
  if (!have_meta) throw ConfigError("findings input carries no meta record");
  return file;
}

FindingsFile parse_findings_file(const std::string& path) {
  try {
    return parse_findings(read_file_maybe_gzip(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace h2reuse
