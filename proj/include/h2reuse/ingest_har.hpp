#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "h2reuse/model.hpp"
#include "h2reuse/timeline.hpp"

namespace h2reuse {

struct HarOptions {
  // Dotted path, relative to each entry, of the object carrying the TLS
  // details (`issuer` string and `sanList` array). Crawlers disagree on
  // where they put it, so the location is configurable.
  std::string cert_path = "response._securityDetails";
  DurationModel model = DurationModel::ENDLESS;
};

// One decoded HAR entry before filtering. Times are already
// page-relative milliseconds.
struct HarEntry {
  std::string request_id;   // empty when the entry carries none
  std::string page_ref;
  bool page_ref_known = false;  // pageref resolves to a page in the log
  double start_ms = 0;
  double duration_ms = 0;
  std::string method;
  std::string url;
  std::string http_version;
  Protocol protocol = Protocol::OTHER;
  bool version_recognized = false;
  int status = 0;
  std::optional<Endpoint> server_endpoint;
  uint64_t socket_id = 0;
  bool socket_id_present = false;
  std::optional<Certificate> certificate;
  IngestWarnings warnings;  // SAN oddities encountered on this entry
};

struct HarPage {
  std::string page_url;
  std::vector<HarEntry> entries;  // in document order
  // Set when the whole file must be discarded (e.g. certificates present
  // but structurally invalid); the reason is tallied in FilterStats.
  bool invalid_certificate_file = false;
};

// Parses a HAR 1.2 document. Throws ParseError (naming the byte offset)
// on malformed JSON or a document that is not a HAR log. A HAR without
// entries yields an empty page.
HarPage load_har(std::string_view document, const HarOptions& options = {});

// Applies the drop rules in a fixed order, tallying each dropped entry
// under the first matching reason. Total filtering: never throws.
std::pair<std::vector<HarEntry>, FilterStats> filter_requests(const std::vector<HarEntry>& entries);

// Groups kept entries by socket id into ConnectionSessions and applies
// the duration model. Sockets whose entries disagree on the server
// endpoint are dropped and tallied as inconsistent_ip.
SessionTimeline reconstruct_sessions(const HarPage& page, std::vector<HarEntry> kept,
                                     FilterStats filters, DurationModel model);

// Convenience: load + filter + reconstruct for one document.
SessionTimeline ingest_har(std::string_view document, const HarOptions& options = {});

// Reads a file (gzip allowed) and ingests it.
SessionTimeline ingest_har_file(const std::string& path, const HarOptions& options = {});

}  // namespace h2reuse
