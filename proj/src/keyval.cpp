#include "rebal/keyval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rebal {

namespace {

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

}  // namespace

bool KeyValueFile::has(const std::string& key) const {
  return get(key).has_value();
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  std::optional<std::string> out;
  for (const auto& e : entries)
    if (e.key == key) out = e.value;
  return out;
}

std::string KeyValueFile::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw ConfigError(origin + ": missing required key '" + key + "'");
  return *v;
}

std::vector<std::string> KeyValueFile::all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.key == key) out.push_back(e.value);
  return out;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

long KeyValueFile::get_long(const std::string& key) const {
  std::string v = trim(require(key));
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(origin + ": key '" + key + "': expected integer, got '" + v + "'");
  return out;
}

long KeyValueFile::get_long_or(const std::string& key, long fallback) const {
  return has(key) ? get_long(key) : fallback;
}

double KeyValueFile::get_real(const std::string& key) const {
  std::string v = trim(require(key));
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(origin + ": key '" + key + "': expected number, got '" + v + "'");
  return out;
}

double KeyValueFile::get_real_or(const std::string& key, double fallback) const {
  return has(key) ? get_real(key) : fallback;
}

std::vector<std::string> KeyValueFile::get_list(const std::string& key) const {
  std::string v = require(key);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = v.find(',', start);
    std::string item = trim(pos == std::string::npos ? v.substr(start) : v.substr(start, pos - start));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw ConfigError(origin + ": key '" + key + "': empty list");
  return out;
}

std::vector<double> KeyValueFile::get_real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError(origin + ": key '" + key + "': expected number, got '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  entries.push_back({key, value, 0});
}

std::string KeyValueFile::canonical() const {
  // Effective view: last occurrence per key wins, except repeatable keys,
  // which keep their order.
  std::vector<std::pair<std::string, std::string>> effective;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    bool overridden = false;
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (entries[j].key == entries[i].key) {
        overridden = entries[i].key != "column" && entries[i].key != "target" &&
                     entries[i].key != "ru_target";
        break;
      }
    if (!overridden) effective.emplace_back(entries[i].key, entries[i].value);
  }
  std::stable_sort(effective.begin(), effective.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::ostringstream out;
  for (const auto& [k, v] : effective) out << k << " = " << v << '\n';
  return out.str();
}

KeyValueFile parse_keyvalue(const std::string& text, const std::string& origin) {
  KeyValueFile out;
  out.origin = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    KeyValueEntry e;
    e.key = trim(t.substr(0, eq));
    e.value = trim(t.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    out.entries.push_back(std::move(e));
  }
  return out;
}

KeyValueFile load_keyvalue(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_keyvalue(ss.str(), path);
}

}  // namespace rebal
