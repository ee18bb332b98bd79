// Line-oriented key = value grammar shared by schema and run-config files.
//
//   # comment
//   key = value
//
// Keys may repeat where the consumer allows it (schema 'column' lines).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rebal/common.hpp"

namespace rebal {

struct KeyValueEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct KeyValueFile {
  std::string origin;
  std::vector<KeyValueEntry> entries;

  bool has(const std::string& key) const;
  // Last occurrence wins; command-line overrides are appended after file entries.
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  std::vector<std::string> all(const std::string& key) const;

  std::string get_or(const std::string& key, const std::string& fallback) const;
  long get_long(const std::string& key) const;
  long get_long_or(const std::string& key, long fallback) const;
  double get_real(const std::string& key) const;
  double get_real_or(const std::string& key, double fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma-separated
  std::vector<double> get_real_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  // Canonical "key = value" text of the effective entries, used for digests
  // and manifests.
  std::string canonical() const;
  std::uint64_t digest() const { return fnv1a64(canonical()); }
};

KeyValueFile parse_keyvalue(const std::string& text, const std::string& origin);
KeyValueFile load_keyvalue(const std::string& path);

}  // namespace rebal
