#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clothsr/mesh.hpp"

namespace clothsr {

/// Flat `key = value` settings. Blank lines and lines starting with '#' are
/// ignored; later assignments override earlier ones.
class Config {
 public:
  Config() = default;
  /// Throws ParseError for a line without '=' or with an empty key.
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  /// Typed getters throw Error naming the key when the value does not parse.
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Three comma- or space-separated numbers.
  Vec3 get_vec3(const std::string& key, const Vec3& fallback) const;

  /// Keys not in `known`, sorted.
  std::vector<std::string> unknown_keys(const std::set<std::string>& known) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace clothsr
