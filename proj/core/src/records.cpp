#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "seqformer/data.hpp"
#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ec == std::errc() ? ptr : buf);
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DDTHH:MM[:SS]
  if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':') {
    return std::nullopt;
  }
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), mo) ||
      !parse_number(text.substr(8, 2), d) || !parse_number(text.substr(11, 2), h) ||
      !parse_number(text.substr(14, 2), mi)) {
    return std::nullopt;
  }
  if (text.size() > 16) {
    if (text.size() < 19 || text[16] != ':' || !parse_number(text.substr(17, 2), sec)) {
      return std::nullopt;
    }
    // Fractional seconds or a trailing 'Z' are tolerated and ignored.
    const std::string_view rest = text.substr(19);
    if (!rest.empty() && rest != "Z" && rest.front() != '.') return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 1440 + h * 60 + mi;
}

std::string format_timestamp(std::int64_t minute) {
  const std::int64_t days = (minute >= 0 ? minute : minute - 1439) / 1440;
  const std::int64_t in_day = minute - days * 1440;
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{static_cast<int>(days)}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(in_day / 60), static_cast<int>(in_day % 60));
  return buf;
}

std::vector<GlucoseRecord> parse_records(std::string_view csv) {
  std::vector<GlucoseRecord> records;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = trim(csv.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == csv.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != kRecordHeader) {
        throw ParseError(line_no, "expected header '" + std::string(kRecordHeader) + "'");
      }
      header_seen = true;
      continue;
    }

    const auto fields = split(line, ',');
    if (fields.size() != 6) {
      throw ParseError(line_no, "expected 6 fields, found " + std::to_string(fields.size()));
    }
    GlucoseRecord r;
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) throw ParseError(line_no, "bad timestamp '" + std::string(trim(fields[0])) + "'");
    r.minute = *ts;

    const std::string_view g = trim(fields[1]);
    if (!g.empty()) {
      double v = 0.0;
      if (!parse_number(g, v)) throw ParseError(line_no, "bad glucose value '" + std::string(g) + "'");
      if (!(v > 0.0 && v <= 600.0)) {
        throw ParseError(line_no, "glucose " + std::string(g) + " outside (0, 600] mg/dL");
      }
      r.glucose = v;
    }
    double* const columns[] = {&r.carbs, &r.bolus, &r.basal, &r.extra};
    for (std::size_t c = 0; c < 4; ++c) {
      const std::string_view f = trim(fields[c + 2]);
      if (f.empty()) continue;
      if (!parse_number(f, *columns[c]) || !std::isfinite(*columns[c])) {
        throw ParseError(line_no, "bad numeric field '" + std::string(f) + "'");
      }
    }
    if (!records.empty() && r.minute <= records.back().minute) {
      throw DataError("line " + std::to_string(line_no) + ": timestamp " + format_timestamp(r.minute) +
                      " is not after the previous record (" +
                      format_timestamp(records.back().minute) + ")");
    }
    records.push_back(r);
  }
  if (!header_seen) throw ParseError(1, "missing header");
  return records;
}

std::string write_records_csv(std::span<const GlucoseRecord> records) {
  std::string out(kRecordHeader);
  out += '\n';
  for (const GlucoseRecord& r : records) {
    out += format_timestamp(r.minute);
    out += ',';
    if (r.glucose) append_number(out, *r.glucose);
    for (double v : {r.carbs, r.bolus, r.basal, r.extra}) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace seqformer
