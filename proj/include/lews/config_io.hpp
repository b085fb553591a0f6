// Field-by-field binding of config structs to manifest keys.
//
// A config exposes `template <class Self, class V> static void
// visit(Self& self, V& v)` calling v("key", self.field) for every field;
// these visitors turn that into manifest writes and reads. Reads leave absent keys at their
// current value.
#pragma once

#include <cstdint>
#include <string>

#include "lews/geogrid.hpp"
#include "lews/manifest.hpp"

namespace lews {

struct ManifestWriter {
  Manifest& m;
  std::string prefix;

  void operator()(const char* key, const std::string& v) { m.set(prefix + key, v); }
  void operator()(const char* key, bool v) { m.set(prefix + key, v ? "true" : "false"); }
  void operator()(const char* key, int v) { m.set(prefix + key, v); }
  void operator()(const char* key, double v) { m.set(prefix + key, v); }
  void operator()(const char* key, std::uint64_t v) { m.set(prefix + key, std::to_string(v)); }
};

struct ManifestReader {
  const Manifest& m;
  std::string prefix;

  bool has(const char* key) const { return m.contains(prefix + key); }

  void operator()(const char* key, std::string& v) const {
    if (has(key)) v = m.get(prefix + key);
  }
  void operator()(const char* key, bool& v) const {
    if (!has(key)) return;
    const auto& s = m.get(prefix + key);
    if (s == "true" || s == "1") {
      v = true;
    } else if (s == "false" || s == "0") {
      v = false;
    } else {
      throw ValidationError("config: '" + prefix + key + "' must be true or false, got '" + s + "'");
    }
  }
  void operator()(const char* key, int& v) const {
    if (!has(key)) return;
    const auto x = m.get_int(prefix + key);
    if (x < INT32_MIN || x > INT32_MAX) throw ValidationError("config: '" + prefix + key + "' is out of range");
    v = static_cast<int>(x);
  }
  void operator()(const char* key, double& v) const {
    if (has(key)) v = m.get_double(prefix + key);
  }
  void operator()(const char* key, std::uint64_t& v) const {
    if (!has(key)) return;
    const auto& s = m.get(prefix + key);
    std::size_t used = 0;
    try {
      if (!s.empty() && s[0] != '-') v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw ValidationError("config: '" + prefix + key + "' must be a non-negative integer, got '" + s + "'");
    }
  }
};

template <typename Config>
void write_config(const Config& cfg, Manifest& m, const std::string& prefix) {
  ManifestWriter w{m, prefix};
  Config::visit(cfg, w);
}

template <typename Config>
void read_config(Config& cfg, const Manifest& m, const std::string& prefix) {
  ManifestReader r{m, prefix};
  Config::visit(cfg, r);
}

}  // namespace lews
