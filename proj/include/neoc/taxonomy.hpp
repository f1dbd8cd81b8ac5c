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

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neoc/json.hpp"

namespace neoc {

/// Lowercase, trim, whitespace runs to '_', Latin diacritics stripped
/// ("Commode à vantaux" -> "commode_a_vantaux"). Idempotent.
std::string normalize_name(std::string_view raw);

/// Stable class identifier: the '/'-joined normalized names from the top
/// level down, e.g. "chest_of_drawers/semainier".
class ClassId {
 public:
  ClassId() = default;
  explicit ClassId(std::string path) : path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }
  /// Last path component.
  std::string_view name() const noexcept;
  bool empty() const noexcept { return path_.empty(); }

  auto operator<=>(const ClassId&) const = default;

 private:
  std::string path_;
};

/// Tree of artifact classes under a synthetic "artifact" root. Immutable
/// once built; concurrent reads are safe.
class Taxonomy {
 public:
  static constexpr std::string_view kRootName = "artifact";

  Taxonomy() = default;

  /// Flat taxonomy with the given top-level classes.
  static Taxonomy flat(const std::vector<std::string>& names);
  static Taxonomy from_json(const Json& tree);
  Json to_json() const;

  /// Adds a class under `parent` (top level when nullopt). Throws
  /// ConfigError on a normalized-name collision among siblings.
  ClassId add(std::string_view display_name, const std::optional<ClassId>& parent = std::nullopt);
  void attach_file(const ClassId& cls, std::string relative_path);

  bool contains(const ClassId& cls) const;
  /// Accepts a full path or a bare name that is unique in the tree.
  ClassId find(std::string_view name_or_path) const;

  std::optional<ClassId> parent(const ClassId& cls) const;
  /// Top-level classes have depth 0.
  std::size_t depth(const ClassId& cls) const;
  /// Chain from the top level down to the parent of `cls`.
  std::vector<ClassId> ancestors(const ClassId& cls) const;
  std::vector<ClassId> children(const std::optional<ClassId>& cls = std::nullopt) const;
  const std::string& display_name(const ClassId& cls) const;
  const std::vector<std::string>& files(const ClassId& cls) const;

  /// All classes in path order.
  std::vector<ClassId> classes() const;
  std::vector<ClassId> leaves() const;
  std::size_t size() const noexcept { return nodes_.size(); }

  const std::filesystem::path& root_path() const noexcept { return root_path_; }
  void set_root_path(std::filesystem::path root) { root_path_ = std::move(root); }

 private:
  struct Node {
    std::string display;
    std::optional<ClassId> parent;
    std::vector<ClassId> children;
    std::vector<std::string> files;
  };

  const Node& node(const ClassId& cls) const;

  std::map<ClassId, Node> nodes_;
  std::vector<ClassId> top_level_;
  std::filesystem::path root_path_;
};

/// Every directory under `root` becomes a class, nesting becomes
/// parent/child, and .ppm/.pgm/.pnm files attach to their directory.
/// Hidden entries are skipped.
Taxonomy load_taxonomy_from_folders(const std::filesystem::path& root);

struct Label {
  ClassId leaf;
  std::vector<ClassId> ancestors;  // top level first, excludes leaf and root
};

/// Label of an image from the directories containing it. Relative paths are
/// taken relative to the taxonomy root.
Label resolve_label(const std::filesystem::path& file, const Taxonomy& taxonomy);

/// Ancestor at `depth` (top level = 0); classes at or above that depth map
/// to themselves.
ClassId rollup(const ClassId& cls, std::size_t depth, const Taxonomy& taxonomy);

/// Title-substring to class mapping. Patterns are stored normalized.
class AliasTable {
 public:
  struct Entry {
    std::string pattern;
    ClassId target;
  };

  AliasTable() = default;
  /// {"title pattern": "class name or path", ...}, resolved against `taxonomy`.
  static AliasTable from_json(const Json& table, const Taxonomy& taxonomy);
  static AliasTable load(const std::filesystem::path& path, const Taxonomy& taxonomy);

  void add(std::string_view pattern, ClassId target);
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Longest normalized pattern contained in the normalized title wins;
/// nullopt when nothing matches. Throws LookupError when equally long
/// patterns point at different classes.
std::optional<ClassId> apply_alias(std::string_view title, const AliasTable& table);

}  // namespace neoc
