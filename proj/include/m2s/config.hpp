#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "m2s/error.hpp"

namespace m2s {

// Flat `key = value` text config. Blank lines and `#` comments are skipped.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::MalformedConfig, "line " + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw Error(ErrorKind::MalformedConfig, "line " + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::optional<std::string> get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    return to_double(*s, key);
  }

  std::optional<long long> get_int(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || ptr != s->data() + s->size())
      throw Error(ErrorKind::MalformedConfig, "key " + key + ": not an integer: " + *s);
    return v;
  }

  // Comma- or whitespace-separated numbers.
  std::optional<std::vector<double>> get_list(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    std::string text = *s;
    for (auto& ch : text)
      if (ch == ',') ch = ' ';
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(tok, key));
    return out;
  }

  template <typename T>
  void read(const std::string& key, T& target) const {
    if constexpr (std::is_floating_point_v<T>) {
      if (auto v = get_double(key)) target = static_cast<T>(*v);
    } else {
      if (auto v = get_int(key)) {
        if (std::is_unsigned_v<T> && *v < 0) throw Error(ErrorKind::MalformedConfig, "key " + key + ": must be >= 0");
        target = static_cast<T>(*v);
      }
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& s, const std::string& key) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedConfig, "key " + key + ": not a number: " + s);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace m2s
