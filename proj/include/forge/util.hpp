#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace forge::util {

std::string read_file(const std::filesystem::path& path);
// Writes bytes verbatim, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string sha1_base64(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
bool contains(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// Percentage count/total rendered to one decimal with half-up rounding,
// computed in integer arithmetic so 934/1260 renders as "74.1" exactly.
std::string percent_1dp(long long count, long long total);
// Half-up rounding of an arbitrary real to one decimal ("52.6").
std::string fixed_1dp(double value);
std::string fixed(double value, int decimals);

// Half-up rounding at one decimal, returned as a number.
double round_1dp(double value);

// Exact rational number. Percentages and accuracies flow through this type
// so identities such as (a - b) + b == a hold without floating-point error.
class Rational {
public:
  Rational() = default;
  Rational(long long num, long long den = 1);

  // Parses plain decimals such as "80.6", "-3", "0.125".
  static Rational from_decimal(std::string_view text);
  // 100 * count / total.
  static Rational percent(long long count, long long total);

  long long num() const noexcept { return num_; }
  long long den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Half-up rounding (ties away from zero) at the given number of decimals.
  std::string render(int decimals = 1) const;

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  bool operator==(const Rational& o) const noexcept { return num_ == o.num_ && den_ == o.den_; }
  bool operator<(const Rational& o) const;

private:
  long long num_ = 0;
  long long den_ = 1;
};

// ISO yyyy-mm-dd validation and weekday (0 = Monday ... 6 = Sunday).
bool parse_iso_date(std::string_view s, int& year, int& month, int& day);
int weekday_index(int year, int month, int day);

} // namespace forge::util
