#include "clothsr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "clothsr/error.hpp"

namespace clothsr {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, expected);
  return out;
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    c.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse(s.str());
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? parse_number<int>(key, get(key, ""), "an integer") : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_number<std::uint64_t>(key, get(key, ""), "an unsigned integer") : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_number<double>(key, get(key, ""), "a number") : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key, "");
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

Vec3 Config::get_vec3(const std::string& key, const Vec3& fallback) const {
  if (!has(key)) return fallback;
  std::string v = get(key, "");
  std::replace(v.begin(), v.end(), ',', ' ');
  std::istringstream in(v);
  std::string parts[3];
  std::string extra;
  if (!(in >> parts[0] >> parts[1] >> parts[2]) || (in >> extra)) bad_value(key, get(key, ""), "three numbers");
  Vec3 out;
  for (int k = 0; k < 3; ++k) out(k) = parse_number<double>(key, parts[k], "three numbers");
  return out;
}

std::vector<std::string> Config::unknown_keys(const std::set<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!known.count(k)) out.push_back(k);
  }
  return out;
}

}  // namespace clothsr
