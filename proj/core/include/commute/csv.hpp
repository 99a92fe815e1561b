#pragma once

// Small text helpers for the CSV/GeoJSON surfaces. Output formatting is fixed
// (LF endings, fixed decimals) so artifacts are byte-stable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace commute {

/// Whole-file read; throws commute::Error when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Throws commute::Error when the file cannot be written.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Iterates lines of a buffer, stripping a trailing '\r'.
class LineCursor {
 public:
  explicit LineCursor(std::string_view text) : text_(text) {}
  bool next(std::string_view& line);
  std::size_t line_number() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

/// Splits one CSV record. Double-quoted fields may contain commas; `""`
/// inside quotes is a literal quote.
std::vector<std::string> split_csv(std::string_view line);
/// Fast path for unquoted records; appends views into `line`.
void split_simple(std::string_view line, std::vector<std::string_view>& out);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

/// Fixed-point formatting; never emits "-0.000".
std::string fixed(double v, int decimals);
/// Quotes a field only when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);
/// Shortest form that parses back to the same double (%.17g).
std::string exact(double v);

std::string_view trim(std::string_view s);

/// 64-bit FNV-1a; used for manifest hashes and seeded substreams.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace commute
