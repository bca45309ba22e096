#pragma once

// Tab-separated text format shared by manifests, registry configs,
// prediction files and DIRE score files:
//
//   # key: value          optional directive lines
//   col_a<TAB>col_b ...   header naming the field order
//   v_a<TAB>v_b ...       one record per line
//
// Blank lines and other '#' lines are ignored.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aigi {

struct TableRow {
  std::size_t line = 0;  // 1-based line number in the source text
  std::vector<std::string> fields;
};

struct TableFile {
  std::map<std::string, std::string> directives;
  std::vector<std::string> columns;
  std::vector<TableRow> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of a column that must exist; throws a parse error naming `source`.
  std::size_t require_column(std::string_view name, std::string_view source) const;
};

TableFile parse_table(std::string_view text, std::string_view source);
TableFile read_table(const std::filesystem::path& path);

std::string render_table(const TableFile& table);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace aigi
