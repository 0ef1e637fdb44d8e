#include "gqcnn/kv_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

#include "gqcnn/error.hpp"

namespace gqcnn {

namespace pt = boost::property_tree;

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_real(const std::string& text, const std::string& what) {
  double value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(what + ": expected a real number, got \"" + text + "\"");
  }
  return value;
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(what + ": expected an integer, got \"" + text + "\"");
  }
  return value;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  try {
    pt::read_ini(in, config.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed key-value text: ") + e.what());
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream out;
  pt::write_ini(out, tree_);
  return out.str();
}

bool KeyValueConfig::has(const std::string& key) const {
  return tree_.get_optional<std::string>(key).has_value();
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  if (auto v = tree_.get_optional<std::string>(key)) return *v;
  return std::nullopt;
}

std::string KeyValueConfig::require(const std::string& key) const {
  if (auto v = get(key)) return *v;
  throw ConfigError("missing required key " + key);
}

std::optional<double> KeyValueConfig::get_real(const std::string& key) const {
  if (auto v = get(key)) return parse_real(*v, key);
  return std::nullopt;
}

std::optional<std::int64_t> KeyValueConfig::get_int(const std::string& key) const {
  if (auto v = get(key)) return parse_int(*v, key);
  return std::nullopt;
}

std::optional<std::uint64_t> KeyValueConfig::get_uint(const std::string& key) const {
  if (auto v = get(key)) {
    std::uint64_t value = 0;
    auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), value);
    if (ec != std::errc() || end != v->data() + v->size() || v->empty()) {
      throw ConfigError(key + ": expected a non-negative integer, got \"" + *v + "\"");
    }
    return value;
  }
  return std::nullopt;
}

std::optional<bool> KeyValueConfig::get_flag(const std::string& key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  if (*v == "1" || *v == "true" || *v == "on" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "off" || *v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got \"" + *v + "\"");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  tree_.put(key, value);
}

void KeyValueConfig::set_real(const std::string& key, double value) { set(key, format_real(value)); }
void KeyValueConfig::set_int(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}
void KeyValueConfig::set_uint(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}
void KeyValueConfig::set_flag(const std::string& key, bool value) { set(key, value ? "1" : "0"); }

std::vector<std::string> KeyValueConfig::sections() const {
  std::vector<std::string> names;
  for (const auto& [name, child] : tree_) {
    if (!child.empty()) names.push_back(name);
  }
  return names;
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [section, child] : other.tree_) {
    if (child.empty()) {
      tree_.put(section, child.data());
      continue;
    }
    for (const auto& [key, value] : child) tree_.put(pt::ptree::path_type(section + "." + key), value.data());
  }
}

}  // namespace gqcnn
