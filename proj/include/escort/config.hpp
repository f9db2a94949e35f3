#ifndef ESCORT_CONFIG_HPP
#define ESCORT_CONFIG_HPP

#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "escort/tensor.hpp"

namespace escort {

struct LayerConfig {
  std::string name;
  ConvShape shape;
  double sparsity = 0.0;
  std::uint64_t seed = 42;
};

/// Config syntax error; `line()` is 1-based.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.'))
      return false;
  return true;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

struct PendingLayer {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, std::uint64_t, std::less<>> ints;
  std::optional<double> sparsity;
  std::set<std::string, std::less<>> seen;
};

inline LayerConfig finish_layer(const PendingLayer& p) {
  for (const char* key : {"m", "c", "h", "w", "r", "s"})
    if (!p.ints.count(key))
      throw ConfigError(p.line, "layer '" + p.name + "' is missing required key '" + key + "'");
  auto get = [&](const char* key, std::uint64_t dflt) {
    auto it = p.ints.find(key);
    return static_cast<std::size_t>(it == p.ints.end() ? dflt : it->second);
  };
  std::optional<ConvShape> shape;
  try {
    shape.emplace(get("n", 1), get("m", 0), get("c", 0), get("h", 0), get("w", 0), get("r", 0),
                  get("s", 0), get("stride", 1), get("pad", 0));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p.line, "layer '" + p.name + "' has an invalid shape: " + e.what());
  }
  return LayerConfig{p.name, *shape, p.sparsity.value_or(0.0), get("seed", 42)};
}

}  // namespace detail

/// Parses the layer description format:
///
///   # comment
///   layer conv2
///   n = 8
///   m = 64
///   ...
///
/// A record starts with `layer <name>` and continues with `key = value`
/// lines until a blank line or the next `layer`. Keys: n m c h w r s
/// stride pad (positive integers; pad may be 0), sparsity (in [0, 1)),
/// seed (unsigned 64-bit). m c h w r s are required; the rest default to
/// n=1 stride=1 pad=0 sparsity=0 seed=42.
inline std::vector<LayerConfig> parse_config(std::string_view text) {
  std::vector<LayerConfig> out;
  std::set<std::string, std::less<>> names;
  std::optional<detail::PendingLayer> cur;

  auto flush = [&] {
    if (cur) out.push_back(detail::finish_layer(*cur));
    cur.reset();
  };

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;

    const bool comment_only = detail::trim(raw).starts_with('#');
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = detail::trim(raw);
    if (line.empty()) {
      if (!comment_only) flush();
      continue;
    }

    if (line.starts_with("layer") &&
        (line.size() == 5 || line[5] == ' ' || line[5] == '\t')) {
      flush();
      const std::string_view name = detail::trim(line.substr(5));
      if (!detail::valid_identifier(name))
        throw ConfigError(lineno, "invalid layer name '" + std::string(name) + "'");
      if (names.count(name)) throw ConfigError(lineno, "duplicate layer name '" + std::string(name) + "'");
      names.emplace(name);
      cur.emplace();
      cur->name = std::string(name);
      cur->line = lineno;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(lineno, "expected 'layer <name>' or 'key = value'");
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view val = detail::trim(line.substr(eq + 1));
    if (!cur) throw ConfigError(lineno, "key '" + std::string(key) + "' outside a layer record");

    static const std::set<std::string, std::less<>> int_keys{"n", "m", "c", "h", "w", "r",
                                                             "s", "stride", "pad", "seed"};
    if (key != "sparsity" && !int_keys.count(key))
      throw ConfigError(lineno, "unknown key '" + std::string(key) + "'");
    if (cur->seen.count(key)) throw ConfigError(lineno, "duplicate key '" + std::string(key) + "'");
    cur->seen.emplace(key);

    if (key == "sparsity") {
      const auto v = detail::parse_number<double>(val);
      if (!v || !(*v >= 0.0 && *v < 1.0))
        throw ConfigError(lineno, "invalid value '" + std::string(val) + "' for key 'sparsity' (need [0, 1))");
      cur->sparsity = *v;
      continue;
    }
    const auto v = detail::parse_number<std::uint64_t>(val);
    const bool may_be_zero = key == "pad" || key == "seed";
    if (!v || (*v == 0 && !may_be_zero))
      throw ConfigError(lineno, "invalid value '" + std::string(val) + "' for key '" + std::string(key) + "'");
    cur->ints[std::string(key)] = *v;
  }
  flush();
  return out;
}

}  // namespace escort

#endif  // ESCORT_CONFIG_HPP
