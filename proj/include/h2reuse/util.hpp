#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace h2reuse {

// Base class for all tool errors. Anything derived from this maps to a
// nonzero CLI exit; redundancy findings themselves are never errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NameFormatError : Error {
  using Error::Error;
};

struct UnsupportedSchemeError : Error {
  using Error::Error;
};

struct UrlError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// File-shaped inputs (ip2asn maps, resolver lists) report the offending line.
struct LoadError : Error {
  using Error::Error;
};

struct InternalError : Error {
  using Error::Error;
};

std::string to_lower_ascii(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

// Parses an ISO 8601 timestamp ("2021-04-20T12:34:56.789Z", offsets allowed)
// into milliseconds since the Unix epoch. Throws ParseError on bad input.
double parse_iso8601_ms(std::string_view s);

// Reads a whole file; transparently inflates gzip (by magic bytes).
std::string read_file_maybe_gzip(const std::string& path);

std::string read_file(const std::string& path);

void write_file(const std::string& path, std::string_view content);

// RFC 4180-ish CSV field quoting; quotes only when needed.
std::string csv_escape(std::string_view field);

// Deterministic shortest round-trip formatting for milliseconds values.
std::string format_ms(double ms);

}  // namespace h2reuse
