#pragma once

// Line-oriented `key = value` documents with `[section]` headers. Sections may
// repeat (manifests use one `[entry]` per cube); keys before the first header
// belong to an unnamed root section.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hsx/core/error.hpp"

namespace hsx {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    auto item = trim(s.substr(start, pos - start));
    if (!item.empty()) out.emplace_back(item);
    start = pos + 1;
  }
  return out;
}

class KvSection {
 public:
  explicit KvSection(std::string name = {}) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::map<std::string, std::string>& values() const { return values_; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get(const std::string& key) const {
    auto v = find(key);
    if (!v) throw Error(ErrorKind::Config, "missing key '" + key + "' in " + label());
    return *v;
  }
  std::string get(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
  }

  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  double get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? parse_double(key, *v) : fallback;
  }
  long get_int(const std::string& key) const { return parse_int(key, get(key)); }
  long get_int(const std::string& key, long fallback) const {
    auto v = find(key);
    return v ? parse_int(key, *v) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw Error(ErrorKind::Config, "key '" + key + "' expects a boolean, got '" + *v + "'");
  }
  std::vector<std::string> get_list(const std::string& key) const { return split_list(get(key)); }

 private:
  std::string label() const { return name_.empty() ? std::string("root section") : "[" + name_ + "]"; }

  double parse_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "key '" + key + "' expects a number, got '" + v + "'");
    }
  }
  long parse_int(const std::string& key, const std::string& v) const {
    long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw Error(ErrorKind::Config, "key '" + key + "' expects an integer, got '" + v + "'");
    return out;
  }

  std::string name_;
  std::map<std::string, std::string> values_;
};

class KvDocument {
 public:
  KvDocument() { sections_.emplace_back(); }

  static KvDocument parse(std::string_view text) {
    KvDocument doc;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = trim(text.substr(start, end - start));
      start = end + 1;
      ++line_no;
      if (line.empty() || line.front() == '#' || line.front() == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": unterminated section header");
        doc.sections_.emplace_back(std::string(trim(line.substr(1, line.size() - 2))));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected 'key = value'");
      auto key = std::string(trim(line.substr(0, eq)));
      if (key.empty())
        throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": empty key");
      doc.sections_.back().set(key, std::string(trim(line.substr(eq + 1))));
    }
    return doc;
  }

  KvSection& root() { return sections_.front(); }
  const KvSection& root() const { return sections_.front(); }

  /// First section with the given name; the root section if the name is empty.
  const KvSection* section(std::string_view name) const {
    if (name.empty()) return &sections_.front();
    for (const auto& s : sections_)
      if (s.name() == name) return &s;
    return nullptr;
  }
  /// Named section or an empty placeholder when absent.
  const KvSection& section_or_empty(std::string_view name) const {
    static const KvSection kEmpty;
    const auto* s = section(name);
    return s ? *s : kEmpty;
  }

  std::vector<const KvSection*> sections(std::string_view name) const {
    std::vector<const KvSection*> out;
    for (const auto& s : sections_)
      if (!s.name().empty() && s.name() == name) out.push_back(&s);
    return out;
  }

  KvSection& add_section(std::string name) { return sections_.emplace_back(std::move(name)); }

  /// Canonical text: root keys first, then sections in insertion order,
  /// keys sorted within each section.
  std::string to_string() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& s : sections_) {
      if (s.name().empty()) {
        if (s.values().empty()) continue;
      } else {
        if (!first) os << '\n';
        os << '[' << s.name() << "]\n";
      }
      for (const auto& [k, v] : s.values()) os << k << " = " << v << '\n';
      first = false;
    }
    return os.str();
  }

 private:
  std::vector<KvSection> sections_;
};

}  // namespace hsx
