#include "aigi/table_file.hpp"

#include <fstream>
#include <sstream>

#include "aigi/common.hpp"

namespace aigi {

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void check_field(std::string_view field) {
  if (field.find_first_of("\t\n\r") != std::string_view::npos)
    fail(ErrorKind::InvalidArgument, "field contains a tab or newline: '" + std::string(field) + "'");
}

}  // namespace

std::optional<std::size_t> TableFile::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return std::nullopt;
}

std::size_t TableFile::require_column(std::string_view name, std::string_view source) const {
  if (auto idx = column(name)) return *idx;
  fail(ErrorKind::Parse, std::string(source) + ": header is missing column '" + std::string(name) + "'");
}

TableFile parse_table(std::string_view text, std::string_view source) {
  TableFile table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      auto colon = body.find(':');
      if (colon != std::string_view::npos && table.columns.empty()) {
        auto key = trim(body.substr(0, colon));
        if (!key.empty() && key.find(' ') == std::string_view::npos)
          table.directives[std::string(key)] = std::string(trim(body.substr(colon + 1)));
      }
      continue;
    }
    auto fields = split_tabs(line);
    if (table.columns.empty()) {
      for (auto& f : fields) f = std::string(trim(f));
      table.columns = std::move(fields);
      continue;
    }
    if (fields.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": expected " << table.columns.size() << " fields, found "
          << fields.size();
      fail(ErrorKind::Parse, msg.str());
    }
    table.rows.push_back({line_no, std::move(fields)});
    if (end == text.size()) break;
  }
  if (table.columns.empty()) fail(ErrorKind::Parse, std::string(source) + ": missing header line");
  return table;
}

TableFile read_table(const std::filesystem::path& path) {
  return parse_table(read_text_file(path), path.string());
}

std::string render_table(const TableFile& table) {
  std::string out;
  for (const auto& [key, value] : table.directives) {
    check_field(value);
    out += "# " + key + ": " + value + "\n";
  }
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      check_field(fields[i]);
      if (i) out += '\t';
      out += fields[i];
    }
    out += '\n';
  };
  emit(table.columns);
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.columns.size())
      fail(ErrorKind::InvalidArgument, "row width does not match header");
    emit(row.fields);
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace aigi
