// Copyright 2026 The neoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "neoc/taxonomy.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "neoc/error.hpp"

namespace neoc {

namespace {

// ASCII base letters for U+00C0..U+017F; nullptr keeps the code point.
constexpr std::array<const char*, 0xC0> kLatinBase = {
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E",
    "I", "I", "I", "I", "D", "N", "O", "O", "O", "O", "O", nullptr,
    "O", "U", "U", "U", "U", "Y", "Th", "ss", "a", "a", "a", "a",
    "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", nullptr, "o", "u", "u", "u",
    "u", "y", "th", "y", "A", "a", "A", "a", "A", "a", "C", "c",
    "C", "c", "C", "c", "C", "c", "D", "d", "D", "d", "E", "e",
    "E", "e", "E", "e", "E", "e", "E", "e", "G", "g", "G", "g",
    "G", "g", "G", "g", "H", "h", "H", "h", "I", "i", "I", "i",
    "I", "i", "I", "i", "I", "i", "IJ", "ij", "J", "j", "K", "k",
    "k", "L", "l", "L", "l", "L", "l", "L", "l", "L", "l", "N",
    "n", "N", "n", "N", "n", "n", nullptr, nullptr, "O", "o", "O", "o",
    "O", "o", "OE", "oe", "R", "r", "R", "r", "R", "r", "S", "s",
    "S", "s", "S", "s", "S", "s", "T", "t", "T", "t", "T", "t",
    "U", "u", "U", "u", "U", "u", "U", "u", "U", "u", "U", "u",
    "W", "w", "Y", "y", "Y", "Z", "z", "Z", "z", "Z", "z", "s",
};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Decodes one UTF-8 sequence at s[i]; returns the code point and advances i.
// Invalid bytes are passed through as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i, std::size_t& len) {
  const auto c0 = static_cast<unsigned char>(s[i]);
  len = 1;
  if (c0 < 0x80) return c0;
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if ((c0 & 0xE0) == 0xC0 && cont(1)) {
    len = 2;
    return (static_cast<char32_t>(c0 & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
  }
  if ((c0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    len = 3;
    return (static_cast<char32_t>(c0 & 0x0F) << 12) |
           (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
           (static_cast<unsigned char>(s[i + 2]) & 0x3F);
  }
  return c0;
}

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string normalize_name(std::string_view raw) {
  std::string stripped;
  stripped.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t len = 1;
    const char32_t cp = next_code_point(raw, i, len);
    if (cp >= 0x300 && cp <= 0x36F) {
      // combining diacritical mark
    } else if (cp >= 0xC0 && cp < 0x180 && kLatinBase[cp - 0xC0] != nullptr) {
      stripped += kLatinBase[cp - 0xC0];
    } else {
      stripped.append(raw.substr(i, len));
    }
    i += len;
  }

  std::size_t begin = 0, end = stripped.size();
  while (begin < end && is_space(static_cast<unsigned char>(stripped[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(stripped[end - 1]))) --end;

  std::string out;
  out.reserve(end - begin);
  bool in_space = false;
  for (std::size_t i = begin; i < end; ++i) {
    const auto c = static_cast<unsigned char>(stripped[i]);
    if (is_space(c)) {
      if (!in_space) out += '_';
      in_space = true;
      continue;
    }
    in_space = false;
    out += c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
  }
  return out;
}

std::string_view ClassId::name() const noexcept {
  const auto slash = path_.rfind('/');
  return slash == std::string::npos ? std::string_view(path_)
                                    : std::string_view(path_).substr(slash + 1);
}

Taxonomy Taxonomy::flat(const std::vector<std::string>& names) {
  Taxonomy t;
  for (const auto& n : names) t.add(n);
  return t;
}

ClassId Taxonomy::add(std::string_view display_name, const std::optional<ClassId>& parent) {
  const auto name = normalize_name(display_name);
  if (name.empty() || name.find('/') != std::string::npos) {
    throw ConfigError("taxonomy: invalid class name '" + std::string(display_name) + "'");
  }
  if (parent && !contains(*parent)) {
    throw LookupError("taxonomy: unknown parent class '" + parent->path() + "'");
  }
  ClassId id(parent ? parent->path() + "/" + name : name);
  if (nodes_.contains(id)) {
    throw ConfigError("taxonomy: duplicate class name '" + name + "' under '" +
                      (parent ? parent->path() : std::string(kRootName)) + "' (from '" +
                      std::string(display_name) + "')");
  }
  nodes_.emplace(id, Node{std::string(display_name), parent, {}, {}});
  if (parent) {
    nodes_.at(*parent).children.push_back(id);
  } else {
    top_level_.push_back(id);
  }
  return id;
}

void Taxonomy::attach_file(const ClassId& cls, std::string relative_path) {
  if (!contains(cls)) throw LookupError("taxonomy: unknown class '" + cls.path() + "'");
  nodes_.at(cls).files.push_back(std::move(relative_path));
}

bool Taxonomy::contains(const ClassId& cls) const { return nodes_.contains(cls); }

const Taxonomy::Node& Taxonomy::node(const ClassId& cls) const {
  const auto it = nodes_.find(cls);
  if (it == nodes_.end()) throw LookupError("taxonomy: unknown class '" + cls.path() + "'");
  return it->second;
}

ClassId Taxonomy::find(std::string_view name_or_path) const {
  std::vector<std::string> parts;
  std::string_view rest = name_or_path;
  while (true) {
    const auto slash = rest.find('/');
    parts.push_back(normalize_name(rest.substr(0, slash)));
    if (slash == std::string_view::npos) break;
    rest.remove_prefix(slash + 1);
  }
  ClassId direct(join(parts, "/"));
  if (contains(direct)) return direct;
  if (parts.size() == 1) {
    std::vector<ClassId> hits;
    for (const auto& [id, _] : nodes_) {
      if (id.name() == parts[0]) hits.push_back(id);
    }
    if (hits.size() == 1) return hits[0];
    if (hits.size() > 1) {
      std::vector<std::string> paths;
      for (const auto& h : hits) paths.push_back(h.path());
      throw LookupError("taxonomy: class name '" + parts[0] + "' is ambiguous: " + join(paths, ", "));
    }
  }
  throw LookupError("taxonomy: unknown class '" + std::string(name_or_path) + "'");
}

std::optional<ClassId> Taxonomy::parent(const ClassId& cls) const { return node(cls).parent; }

std::size_t Taxonomy::depth(const ClassId& cls) const {
  return ancestors(cls).size();
}

std::vector<ClassId> Taxonomy::ancestors(const ClassId& cls) const {
  std::vector<ClassId> chain;
  auto p = node(cls).parent;
  while (p) {
    chain.push_back(*p);
    p = node(*p).parent;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::vector<ClassId> Taxonomy::children(const std::optional<ClassId>& cls) const {
  return cls ? node(*cls).children : top_level_;
}

const std::string& Taxonomy::display_name(const ClassId& cls) const { return node(cls).display; }

const std::vector<std::string>& Taxonomy::files(const ClassId& cls) const { return node(cls).files; }

std::vector<ClassId> Taxonomy::classes() const {
  std::vector<ClassId> out;
  for (const auto& [id, _] : nodes_) out.push_back(id);
  return out;
}

std::vector<ClassId> Taxonomy::leaves() const {
  std::vector<ClassId> out;
  for (const auto& [id, n] : nodes_) {
    if (n.children.empty()) out.push_back(id);
  }
  return out;
}

Json Taxonomy::to_json() const {
  auto subtree = [&](auto&& self, const ClassId& id) -> Json {
    const auto& n = node(id);
    Json children = Json::array();
    for (const auto& c : n.children) children.push_back(self(self, c));
    return Json{{"name", std::string(id.name())}, {"display", n.display}, {"children", children}};
  };
  Json children = Json::array();
  for (const auto& top : top_level_) children.push_back(subtree(subtree, top));
  return Json{{"name", std::string(kRootName)}, {"children", children}};
}

Taxonomy Taxonomy::from_json(const Json& tree) {
  Taxonomy t;
  auto walk = [&](auto&& self, const Json& node, const std::optional<ClassId>& parent) -> void {
    const auto display = node.contains("display") ? node.at("display").get<std::string>()
                                                  : node.at("name").get<std::string>();
    const auto id = t.add(display, parent);
    if (node.contains("children")) {
      for (const auto& c : node.at("children")) self(self, c, id);
    }
  };
  try {
    for (const auto& c : tree.at("children")) walk(walk, c, std::nullopt);
  } catch (const Json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("taxonomy JSON: ") + e.what());
  }
  return t;
}

Taxonomy load_taxonomy_from_folders(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw LookupError("taxonomy root '" + root.string() + "' is not a directory");
  }
  Taxonomy t;
  t.set_root_path(root);
  auto walk = [&](auto&& self, const fs::path& dir, const std::optional<ClassId>& parent,
                  const std::string& rel) -> void {
    std::vector<fs::directory_entry> entries{fs::directory_iterator(dir), fs::directory_iterator{}};
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
    for (const auto& e : entries) {
      const auto fname = e.path().filename().string();
      if (fname.empty() || fname[0] == '.') continue;
      if (e.is_directory()) {
        const auto id = t.add(fname, parent);
        self(self, e.path(), id, rel.empty() ? fname : rel + "/" + fname);
      } else if (parent && e.is_regular_file() && is_image_file(e.path())) {
        t.attach_file(*parent, rel + "/" + fname);
      }
    }
  };
  walk(walk, root, std::nullopt, "");
  if (t.size() == 0) {
    throw ConfigError("taxonomy root '" + root.string() + "' contains no class directories");
  }
  return t;
}

Label resolve_label(const std::filesystem::path& file, const Taxonomy& taxonomy) {
  auto rel = file;
  if (file.is_absolute()) {
    if (taxonomy.root_path().empty()) {
      throw LookupError("resolve_label: absolute path '" + file.string() +
                        "' but the taxonomy has no root directory");
    }
    rel = file.lexically_normal().lexically_relative(
        std::filesystem::absolute(taxonomy.root_path()).lexically_normal());
  }
  rel = rel.lexically_normal();
  std::vector<std::string> dirs;
  for (const auto& part : rel.parent_path()) {
    const auto s = part.string();
    if (s == "..") throw LookupError("resolve_label: '" + file.string() + "' lies outside the taxonomy");
    if (s.empty() || s == ".") continue;
    dirs.push_back(s);
  }
  if (rel.empty() || rel.filename().empty() || rel.string().starts_with("..")) {
    throw LookupError("resolve_label: '" + file.string() + "' lies outside the taxonomy");
  }
  if (dirs.empty()) {
    throw LookupError("resolve_label: '" + file.string() +
                      "' sits at the taxonomy root; images must live inside a class directory");
  }
  std::optional<ClassId> current;
  std::vector<ClassId> chain;
  for (const auto& d : dirs) {
    ClassId next(current ? current->path() + "/" + normalize_name(d) : normalize_name(d));
    if (!taxonomy.contains(next)) {
      throw LookupError("resolve_label: directory '" + d + "' of '" + file.string() +
                        "' is not a class in the taxonomy");
    }
    if (current) chain.push_back(*current);
    current = next;
  }
  return Label{*current, chain};
}

ClassId rollup(const ClassId& cls, std::size_t depth, const Taxonomy& taxonomy) {
  const auto chain = taxonomy.ancestors(cls);  // throws on unknown class
  if (chain.size() <= depth) return cls;
  return chain[depth];
}

void AliasTable::add(std::string_view pattern, ClassId target) {
  auto norm = normalize_name(pattern);
  if (norm.empty()) throw ConfigError("alias table: empty pattern");
  entries_.push_back({std::move(norm), std::move(target)});
}

AliasTable AliasTable::from_json(const Json& table, const Taxonomy& taxonomy) {
  if (!table.is_object()) {
    throw FormatError(FormatError::Kind::kMalformed, "alias table must be a JSON object");
  }
  AliasTable out;
  for (const auto& [pattern, target] : table.items()) {
    out.add(pattern, taxonomy.find(target.get<std::string>()));
  }
  return out;
}

AliasTable AliasTable::load(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  return from_json(read_json(path), taxonomy);
}

std::optional<ClassId> apply_alias(std::string_view title, const AliasTable& table) {
  const auto norm = normalize_name(title);
  std::size_t best = 0;
  std::set<ClassId> winners;
  std::vector<std::string> winning_patterns;
  for (const auto& e : table.entries()) {
    if (norm.find(e.pattern) == std::string::npos) continue;
    if (e.pattern.size() > best) {
      best = e.pattern.size();
      winners.clear();
      winning_patterns.clear();
    }
    if (e.pattern.size() == best) {
      winners.insert(e.target);
      winning_patterns.push_back("'" + e.pattern + "' -> " + e.target.path());
    }
  }
  if (winners.empty()) return std::nullopt;
  if (winners.size() > 1) {
    throw LookupError("alias: title '" + std::string(title) + "' matches equally long patterns: " +
                      join(winning_patterns, ", "));
  }
  return *winners.begin();
}

}  // namespace neoc
