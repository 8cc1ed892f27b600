#include "tasktcn/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <vector>

#include "tasktcn/common/errors.hpp"

namespace tasktcn::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "NA" || s == "nan" || s == "NaN" || s == "null";
}

/// nullopt for a missing value; throws on garbage.
std::optional<float> parse_value(std::string_view s, std::size_t line, const std::string& column) {
  if (is_missing(s)) return std::nullopt;
  float v = 0.0f;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column +
                         "' is not a number: '" + std::string(s) + "'",
                     line);
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name,
                      std::size_t line) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("header lacks column '" + name + "'", line);
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::int64_t parse_iso8601(std::string_view text) {
  text = trim(text);
  auto fail = [&]() -> std::int64_t {
    throw ParseError("malformed ISO-8601 timestamp '" + std::string(text) + "'", 0);
  };
  if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':') {
    return fail();
  }
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || !parse_int(text.substr(11, 2), hour) ||
      !parse_int(text.substr(14, 2), minute)) {
    return fail();
  }
  std::string_view rest = text.substr(16);
  if (!rest.empty() && rest.front() == ':') {
    if (rest.size() < 3 || !parse_int(rest.substr(1, 2), second)) return fail();
    rest.remove_prefix(3);
  }
  if (rest == "Z" || rest == "+00:00" || rest == "+0000") rest = {};
  if (!rest.empty()) return fail();
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59 || hour < 0 || minute < 0 ||
      second < 0) {
    return fail();
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kSecondsPerDay + hour * 3600 + minute * 60 + second;
}

std::string format_iso8601(std::int64_t timestamp) {
  const std::int64_t day = day_of(timestamp);
  const std::int64_t secs = timestamp - day * kSecondsPerDay;
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{static_cast<int>(day)}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

ParkRecord load_park_csv(const std::filesystem::path& path, const DatasetSpec& spec,
                         std::string park_id) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 1);

  std::vector<std::string> header;
  for (auto field : split_fields(line)) header.emplace_back(field);
  const std::size_t ts_col = column_of(header, spec.timestamp_column, 1);
  const std::size_t power_col = column_of(header, spec.power_column, 1);
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  if (spec.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c > ts_col && c < power_col) {
        feature_cols.push_back(c);
        names.push_back(header[c]);
      }
    }
  } else {
    for (const auto& name : spec.feature_columns) {
      feature_cols.push_back(column_of(header, name, 1));
      names.push_back(name);
    }
  }
  if (feature_cols.empty()) throw ParseError(path.string() + ": no feature columns", 1);

  struct Row {
    std::int64_t ts;
    std::vector<float> features;
    float power;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    if (is_missing(fields[ts_col])) continue;
    std::int64_t ts = 0;
    try {
      ts = parse_iso8601(fields[ts_col]);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    Row row{ts, {}, 0.0f};
    bool missing = false;
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto v = parse_value(fields[feature_cols[k]], line_no, names[k]);
      if (!v) missing = true;
      row.features.push_back(v.value_or(0.0f));
    }
    const auto p = parse_value(fields[power_col], line_no, spec.power_column);
    if (!p || missing) continue;
    if (*p < 0.0f || *p > 1.0f) {
      throw ValidationError(path.string() + " line " + std::to_string(line_no) + ": power " +
                            std::string(fields[power_col]) + " outside [0, 1]");
    }
    row.power = *p;
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ts == rows[i - 1].ts) {
      throw ValidationError(path.string() + ": duplicate timestamp " + format_iso8601(rows[i].ts));
    }
  }

  ParkRecord record;
  record.park_id = park_id.empty() ? path.stem().string() : std::move(park_id);
  record.feature_names = std::move(names);
  record.timestamps.reserve(rows.size());
  record.power.reserve(rows.size());
  record.features.reserve(rows.size() * feature_cols.size());
  for (auto& row : rows) {
    record.timestamps.push_back(row.ts);
    record.features.insert(record.features.end(), row.features.begin(), row.features.end());
    record.power.push_back(row.power);
  }
  return record;
}

void write_park_csv(const std::filesystem::path& path, const ParkRecord& record,
                    const DatasetSpec& spec) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << spec.timestamp_column;
  for (const auto& name : record.feature_names) out << ',' << name;
  out << ',' << spec.power_column << '\n';
  char buf[64];
  auto put = [&](float v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t t = 0; t < record.length(); ++t) {
    out << format_iso8601(record.timestamps[t]);
    for (std::size_t f = 0; f < record.num_features(); ++f) {
      out << ',';
      put(record.feature(t, f));
    }
    out << ',';
    put(record.power[t]);
    out << '\n';
  }
}

}  // namespace tasktcn::data
