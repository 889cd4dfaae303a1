#include "h2reuse/util.hpp"

#include <zlib.h>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace h2reuse {

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      return parts;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    char a = s[i], b = prefix[i];
    if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
    if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
    if (a != b) return false;
  }
  return true;
}

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

int parse_digits(std::string_view s, size_t pos, size_t n) {
  int v = 0;
  if (pos + n > s.size()) throw ParseError("timestamp too short: '" + std::string(s) + "'");
  for (size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9')
      throw ParseError("bad digit in timestamp: '" + std::string(s) + "'");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

double parse_iso8601_ms(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.frac][Z|±HH:MM|±HHMM]
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    throw ParseError("unrecognized timestamp: '" + std::string(s) + "'");
  int year = parse_digits(s, 0, 4);
  int month = parse_digits(s, 5, 2);
  int day = parse_digits(s, 8, 2);
  int hour = parse_digits(s, 11, 2);
  int minute = parse_digits(s, 14, 2);
  int second = parse_digits(s, 17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    throw ParseError("timestamp field out of range: '" + std::string(s) + "'");

  size_t pos = 19;
  double frac_ms = 0;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    double scale = 100.0;  // first fractional digit is 100 ms
    size_t digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      frac_ms += (s[pos] - '0') * scale;
      scale /= 10.0;
      ++pos;
      ++digits;
    }
    if (digits == 0) throw ParseError("empty fraction in timestamp: '" + std::string(s) + "'");
  }

  int offset_min = 0;
  if (pos < s.size()) {
    char c = s[pos];
    if (c == 'Z' || c == 'z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      int sign = c == '+' ? 1 : -1;
      ++pos;
      int oh = parse_digits(s, pos, 2);
      pos += 2;
      if (pos < s.size() && s[pos] == ':') ++pos;
      int om = pos + 2 <= s.size() ? parse_digits(s, pos, 2) : 0;
      pos += pos + 2 <= s.size() ? 2 : 0;
      offset_min = sign * (oh * 60 + om);
    }
  }
  if (pos != s.size())
    throw ParseError("trailing garbage in timestamp: '" + std::string(s) + "'");

  int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second - offset_min * 60;
  return static_cast<double>(secs) * 1000.0 + frac_ms;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

namespace {

std::string gunzip(const std::string& data) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error("zlib init failed");
  std::string out;
  std::array<char, 1 << 16> buf;
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError("gzip stream corrupt");
    }
    out.append(buf.data(), buf.size() - zs.avail_out);
  } while (ret != Z_STREAM_END && zs.avail_in > 0);
  inflateEnd(&zs);
  if (ret != Z_STREAM_END) throw ParseError("gzip stream truncated");
  return out;
}

}  // namespace

std::string read_file_maybe_gzip(const std::string& path) {
  std::string raw = read_file(path);
  if (raw.size() >= 2 && static_cast<unsigned char>(raw[0]) == 0x1f &&
      static_cast<unsigned char>(raw[1]) == 0x8b)
    return gunzip(raw);
  return raw;
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("short write: " + path);
}

std::string csv_escape(std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_ms(double ms) {
  if (std::isinf(ms)) return "inf";
  double rounded = std::round(ms);
  if (rounded == ms && std::fabs(ms) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", ms);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", ms);
  return buf;
}

}  // namespace h2reuse
