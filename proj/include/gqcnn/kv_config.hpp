#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

namespace gqcnn {

/// Sectioned key-value text ("[section]" headers, "key=value" lines).
/// Keys are addressed as "section.key". Values round-trip exactly: reals are
/// written with 17 significant digits.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  std::string to_string() const;

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;

  std::optional<double> get_real(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_uint(const std::string& key) const;
  std::optional<bool> get_flag(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_real(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);
  void set_uint(const std::string& key, std::uint64_t value);
  void set_flag(const std::string& key, bool value);

  /// Section names in file order.
  std::vector<std::string> sections() const;

  /// Copies every key of `other` over this one.
  void merge(const KeyValueConfig& other);

 private:
  boost::property_tree::ptree tree_;
};

std::string format_real(double value);
double parse_real(const std::string& text, const std::string& what);
std::int64_t parse_int(const std::string& text, const std::string& what);

}  // namespace gqcnn
