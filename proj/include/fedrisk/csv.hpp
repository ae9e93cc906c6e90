#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fedrisk/error.hpp"

namespace fedrisk::csv {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

// OULAD marks missing values with "?"; blanks are treated the same way.
inline bool is_missing(std::string_view field) {
  const auto t = trim(field);
  return t.empty() || t == "?";
}

// Splits one line into fields. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

template <typename T>
std::optional<T> parse_number(std::string_view field) {
  const auto t = trim(field);
  if (t.empty()) return std::nullopt;
  T value{};
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

// Shortest round-trip representation; locale independent.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::string table)
      : table_(std::move(table)), in_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in_, line)) {
      throw DataError("table " + table_ + ": missing header row in " + path.string());
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    header_ = split_line(line);
  }

  const std::string& table() const noexcept { return table_; }

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    throw DataError("table " + table_ + ": header is missing column '" + std::string(name) + "'");
  }

  // Next non-blank record; false at end of file. Short rows are padded
  // with empty fields so column access never goes out of range.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_number_;
      if (trim(line).empty()) continue;
      fields = split_line(line);
      short_row_ = fields.size() < header_.size();
      if (short_row_) fields.resize(header_.size());
      return true;
    }
    return false;
  }

  bool short_row() const noexcept { return short_row_; }
  std::size_t line_number() const noexcept { return line_number_ + 1; }

 private:
  std::string table_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_number_ = 0;
  bool short_row_ = false;
};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    (write_field(fields, first), ...);
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_.string());
  }

  void row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) write_field(f, first);
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  void separator(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }

  void write_field(std::string_view s, bool& first) {
    separator(first);
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
      out_ << s;
      return;
    }
    out_ << '"';
    for (char c : s) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }
  void write_field(const std::string& s, bool& first) { write_field(std::string_view(s), first); }
  void write_field(const char* s, bool& first) { write_field(std::string_view(s), first); }
  void write_field(double v, bool& first) {
    separator(first);
    out_ << format_double(v);
  }
  template <typename I>
    requires std::is_integral_v<I>
  void write_field(I v, bool& first) {
    separator(first);
    out_ << v;
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace fedrisk::csv
