#pragma once

// On-disk database format: three CSV files.
//
//   tests.csv     header "id,f0,...,f{D-1}", one row per stimulus
//   coverage.csv  header "test_id,point_id", rows sorted by (test_id,
//                 point_id), one row per (test, exercised point) pair
//   model.csv     header "point_id,group_id" or "point_id,group_id,name",
//                 one row per point, point ids contiguous from 0
//
// Files are UTF-8 with LF line endings; CR bytes are rejected. All parse
// errors carry path and line number. Floats are written with the shortest
// round-trip representation, so load(save(db)) reproduces values exactly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/format.hpp"

namespace covsel {

struct DatabaseFiles {
  std::string tests_path;
  std::string coverage_path;
  std::string model_path;
};

inline DatabaseFiles database_files(const std::string& dir) {
  const std::filesystem::path base(dir);
  return DatabaseFiles{(base / "tests.csv").string(),
                       (base / "coverage.csv").string(),
                       (base / "model.csv").string()};
}

namespace detail {

inline bool valid_utf8(std::string_view text) {
  const unsigned char* p = reinterpret_cast<const unsigned char*>(text.data());
  const unsigned char* end = p + text.size();
  while (p < end) {
    if (*p < 0x80) {
      ++p;
      continue;
    }
    int len;
    unsigned char first = *p;
    if ((first & 0xE0) == 0xC0 && first >= 0xC2) len = 2;
    else if ((first & 0xF0) == 0xE0) len = 3;
    else if ((first & 0xF8) == 0xF0 && first <= 0xF4) len = 4;
    else return false;
    if (end - p < len) return false;
    for (int i = 1; i < len; ++i)
      if ((p[i] & 0xC0) != 0x80) return false;
    // Reject overlong encodings and surrogates.
    if (len == 3 && first == 0xE0 && p[1] < 0xA0) return false;
    if (len == 3 && first == 0xED && p[1] >= 0xA0) return false;
    if (len == 4 && first == 0xF0 && p[1] < 0x90) return false;
    if (len == 4 && first == 0xF4 && p[1] >= 0x90) return false;
    p += len;
  }
  return true;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line,
                                    const std::string& what) {
  fail(path, ":", line, ": ", what);
}

// Splits file content into lines, enforcing the encoding rules. Line numbers
// are 1-based. A final line without a trailing LF is accepted.
inline std::vector<std::string_view> split_lines(std::string_view content,
                                                 const std::string& path) {
  require(valid_utf8(content), path, ": not valid UTF-8");
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= content.size(); ++i) {
    if (i == content.size() || content[i] == '\n') {
      if (i == content.size() && start == i) break;  // trailing newline
      lines.push_back(content.substr(start, i - start));
      start = i + 1;
    } else if (content[i] == '\r') {
      parse_fail(path, lines.size() + 1,
                 "CR byte found; files must use LF line endings");
    }
  }
  return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

template <class Int>
Int parse_uint(std::string_view text, const std::string& path,
               std::size_t line, const char* what) {
  Int value{};
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    parse_fail(path, line,
               concat("invalid ", what, " '", std::string(text), "'"));
  return value;
}

inline double parse_double(std::string_view text, const std::string& path,
                           std::size_t line, const char* what) {
  double value{};
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    parse_fail(path, line,
               concat("invalid ", what, " '", std::string(text), "'"));
  if (!std::isfinite(value))
    parse_fail(path, line,
               concat(what, " '", std::string(text), "' is not finite"));
  return value;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path, " for reading");
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  require(!in.bad(), "read error on ", path);
  return content;
}

inline void write_file(const std::string& path, std::string_view content) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    require(!ec, "cannot create directory ", parent.string(), ": ",
            ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open ", path, " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  require(out.good(), "write error on ", path);
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  return detail::read_file(path);
}
inline void write_text_file(const std::string& path, std::string_view content) {
  detail::write_file(path, content);
}

// Loads and cross-validates the three database files.
inline TestDatabase load_database(const DatabaseFiles& files) {
  TestDatabase db;

  {  // model.csv first: it defines the point universe.
    const std::string content = detail::read_file(files.model_path);
    const auto lines = detail::split_lines(content, files.model_path);
    require(!lines.empty(), files.model_path, ": empty file");
    const auto header = detail::split_fields(lines[0]);
    bool with_names = false;
    if (header.size() == 3 && header[2] == "name") with_names = true;
    else
      require(header.size() == 2, files.model_path,
              ":1: expected header 'point_id,group_id[,name]'");
    require(header[0] == "point_id" && header[1] == "group_id",
            files.model_path, ":1: expected header 'point_id,group_id[,name]'");

    std::vector<GroupId> group_of;
    GroupId max_group = 0;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      const auto fields = detail::split_fields(lines[ln]);
      if (fields.size() != (with_names ? 3u : 2u))
        detail::parse_fail(files.model_path, ln + 1,
                           concat("expected ", with_names ? 3 : 2,
                                  " fields, found ", fields.size()));
      const auto point = detail::parse_uint<PointId>(
          fields[0], files.model_path, ln + 1, "point id");
      if (point != group_of.size())
        detail::parse_fail(files.model_path, ln + 1,
                           concat("point ids must be contiguous from 0; "
                                  "expected ",
                                  group_of.size(), ", found ", point));
      const auto group = detail::parse_uint<GroupId>(
          fields[1], files.model_path, ln + 1, "group id");
      group_of.push_back(group);
      max_group = std::max(max_group, group);
      if (with_names) db.model.point_names.emplace_back(fields[2]);
    }
    require(!group_of.empty(), files.model_path, ": no points defined");
    db.model.point_count = static_cast<std::uint32_t>(group_of.size());
    db.partition =
        CoveragePartition::from_group_of(std::move(group_of), max_group + 1);
  }

  {  // tests.csv
    const std::string content = detail::read_file(files.tests_path);
    const auto lines = detail::split_lines(content, files.tests_path);
    require(!lines.empty(), files.tests_path, ": empty file");
    const auto header = detail::split_fields(lines[0]);
    require(header.size() >= 2 && header[0] == "id", files.tests_path,
            ":1: expected header 'id,f0,...'");
    db.dimension = static_cast<std::uint32_t>(header.size() - 1);
    for (std::uint32_t d = 0; d < db.dimension; ++d) {
      const std::string expected = concat("f", d);
      require(header[d + 1] == expected, files.tests_path,
              ":1: expected column '", expected, "', found '",
              std::string(header[d + 1]), "'");
    }
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      const auto fields = detail::split_fields(lines[ln]);
      if (fields.size() != header.size())
        detail::parse_fail(files.tests_path, ln + 1,
                           concat("expected ", header.size(),
                                  " fields, found ", fields.size()));
      db.ids.push_back(detail::parse_uint<TestId>(fields[0], files.tests_path,
                                                  ln + 1, "test id"));
      for (std::uint32_t d = 0; d < db.dimension; ++d)
        db.features.push_back(detail::parse_double(
            fields[d + 1], files.tests_path, ln + 1, "feature value"));
    }
    require(!db.ids.empty(), files.tests_path, ": no tests defined");
  }

  {  // coverage.csv
    db.signatures.assign(db.ids.size(), {});
    std::unordered_map<TestId, std::uint32_t> row_of;
    for (std::uint32_t r = 0; r < db.ids.size(); ++r) {
      const auto [it, inserted] = row_of.emplace(db.ids[r], r);
      (void)it;
      require(inserted, files.tests_path, ": duplicate test id ", db.ids[r]);
    }

    const std::string content = detail::read_file(files.coverage_path);
    const auto lines = detail::split_lines(content, files.coverage_path);
    require(!lines.empty(), files.coverage_path, ": empty file");
    require(lines[0] == "test_id,point_id", files.coverage_path,
            ":1: expected header 'test_id,point_id'");
    bool have_prev = false;
    TestId prev_test = 0;
    PointId prev_point = 0;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      const auto fields = detail::split_fields(lines[ln]);
      if (fields.size() != 2)
        detail::parse_fail(files.coverage_path, ln + 1,
                           concat("expected 2 fields, found ", fields.size()));
      const auto test = detail::parse_uint<TestId>(
          fields[0], files.coverage_path, ln + 1, "test id");
      const auto point = detail::parse_uint<PointId>(
          fields[1], files.coverage_path, ln + 1, "point id");
      if (have_prev &&
          (test < prev_test || (test == prev_test && point <= prev_point)))
        detail::parse_fail(files.coverage_path, ln + 1,
                           "rows must be strictly sorted by (test_id, "
                           "point_id)");
      have_prev = true;
      prev_test = test;
      prev_point = point;
      const auto it = row_of.find(test);
      if (it == row_of.end())
        detail::parse_fail(files.coverage_path, ln + 1,
                           concat("unknown test id ", test));
      if (point >= db.model.point_count)
        detail::parse_fail(files.coverage_path, ln + 1,
                           concat("point ", point, " outside the model (",
                                  db.model.point_count, " points)"));
      db.signatures[it->second].points.push_back(point);
    }
  }

  db.finalize();
  return db;
}

inline void save_database(const TestDatabase& db, const DatabaseFiles& files) {
  {
    std::string out = "id";
    for (std::uint32_t d = 0; d < db.dimension; ++d) out += concat(",f", d);
    out += '\n';
    for (std::uint32_t r = 0; r < db.ids.size(); ++r) {
      out += std::to_string(db.ids[r]);
      const auto row = db.row(r);
      for (const double v : row) {
        out += ',';
        out += format_double(v);
      }
      out += '\n';
    }
    detail::write_file(files.tests_path, out);
  }
  {
    // Rows come out sorted because ids are emitted in ascending order and
    // signatures are sorted; loaders depend on that.
    std::vector<std::uint32_t> order(db.ids.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) order[r] = r;
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                return db.ids[a] < db.ids[b];
              });
    std::string out = "test_id,point_id\n";
    for (const std::uint32_t r : order)
      for (const PointId p : db.signatures[r].points)
        out += concat(db.ids[r], ',', p, '\n');
    detail::write_file(files.coverage_path, out);
  }
  {
    const bool with_names = !db.model.point_names.empty();
    std::string out =
        with_names ? "point_id,group_id,name\n" : "point_id,group_id\n";
    for (PointId p = 0; p < db.model.point_count; ++p) {
      out += concat(p, ',', db.partition.group_of[p]);
      if (with_names) {
        require(db.model.point_names[p].find(',') == std::string::npos &&
                    db.model.point_names[p].find('\n') == std::string::npos,
                "point name '", db.model.point_names[p],
                "' contains a delimiter");
        out += ',';
        out += db.model.point_names[p];
      }
      out += '\n';
    }
    detail::write_file(files.model_path, out);
  }
}

}  // namespace covsel
