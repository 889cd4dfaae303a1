#include "h2reuse/timeline.hpp"

namespace h2reuse {

const char* duration_model_name(DurationModel m) {
  switch (m) {
    case DurationModel::ENDLESS: return "endless";
    case DurationModel::IMMEDIATE: return "immediate";
    case DurationModel::MEASURED: return "measured";
  }
  return "?";
}

std::optional<DurationModel> duration_model_from_name(std::string_view name) {
  if (name == "endless") return DurationModel::ENDLESS;
  if (name == "immediate") return DurationModel::IMMEDIATE;
  if (name == "measured") return DurationModel::MEASURED;
  return std::nullopt;
}

FilterStats& FilterStats::operator+=(const FilterStats& other) {
  socket_id_zero += other.socket_id_zero;
  missing_ip += other.missing_ip;
  inconsistent_ip += other.inconsistent_ip;
  invalid_method += other.invalid_method;
  invalid_version += other.invalid_version;
  invalid_status += other.invalid_status;
  bad_page_ref += other.bad_page_ref;
  missing_certificate += other.missing_certificate;
  non_h2_protocol += other.non_h2_protocol;
  missing_request_id += other.missing_request_id;
  invalid_url += other.invalid_url;
  invalid_certificate_file += other.invalid_certificate_file;
  return *this;
}

IngestWarnings& IngestWarnings::operator+=(const IngestWarnings& other) {
  cert_conflicts += other.cert_conflicts;
  ip_sans_ignored += other.ip_sans_ignored;
  bad_sans_ignored += other.bad_sans_ignored;
  unknown_codes += other.unknown_codes;
  truncated_tail += other.truncated_tail;
  unbound_requests += other.unbound_requests;
  dropped_sessions += other.dropped_sessions;
  return *this;
}

}  // namespace h2reuse
