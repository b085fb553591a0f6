#include "lews/manifest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lews/geogrid.hpp"

namespace lews {

void Manifest::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

void Manifest::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }

void Manifest::set(const std::string& key, double value) { set(key, format_real(value)); }

bool Manifest::contains(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw IoError("manifest: missing key '" + key + "'");
}

std::int64_t Manifest::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw IoError("manifest: key '" + key + "' is not an integer: '" + v + "'");
  }
  return out;
}

double Manifest::get_double(const std::string& key) const {
  const std::string& v = get(key);
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw IoError("manifest: key '" + key + "' is not a number: '" + v + "'");
  }
  return out;
}

std::string Manifest::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw IoError("manifest line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw IoError("manifest line " + std::to_string(lineno) + ": empty key");
    m.set(key, trim(t.substr(eq + 1)));
  }
  return m;
}

void Manifest::write(const std::filesystem::path& path) const { write_text_file(path, to_string()); }

Manifest Manifest::read(const std::filesystem::path& path) { return parse(read_text_file(path)); }

std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& text) {
  const auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = text.find_last_not_of(" \t\r\n");
  return text.substr(b, e - b + 1);
}

void write_f32le(const std::filesystem::path& path, std::span<const float> values) {
  std::string bytes;
  bytes.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<char>(word & 0xFFu);
    bytes[4 * i + 1] = static_cast<char>((word >> 8) & 0xFFu);
    bytes[4 * i + 2] = static_cast<char>((word >> 16) & 0xFFu);
    bytes[4 * i + 3] = static_cast<char>((word >> 24) & 0xFFu);
  }
  write_text_file(path, bytes);
}

std::vector<float> read_f32le(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() % 4 != 0) {
    throw IoError(path.string() + ": payload length " + std::to_string(bytes.size()) +
                  " is not a multiple of 4 bytes");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t word = 0;
    for (int b = 3; b >= 0; --b) {
      word = (word << 8) | static_cast<unsigned char>(bytes[4 * i + b]);
    }
    out[i] = std::bit_cast<float>(word);
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace lews
