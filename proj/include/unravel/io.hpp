#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unravel/channels.hpp"
#include "unravel/common.hpp"
#include "unravel/version.hpp"

#include "json.hpp"

namespace unravel {

// Canonical, locale-independent text form of a double: shortest string that
// round-trips. Keeps output files byte-stable across platforms and locales.
inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  require(ec == std::errc(), "format_double: buffer too small");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw config_error("bad numeric field '" + std::string(s) + "' in " +
                       where);
  return v;
}

inline long long parse_int(std::string_view s, const std::string& where) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw config_error("bad integer field '" + std::string(s) + "' in " +
                       where);
  return v;
}

// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

inline std::string file_checksum(const std::filesystem::path& path) {
  return fnv1a64_hex(read_text_file(path));
}

// Write-to-temp + rename, so readers never observe a half-written file.
inline void atomic_write_text(const std::filesystem::path& path,
                              std::string_view content) {
  namespace fs = std::filesystem;
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// --- CSV ------------------------------------------------------------------
// UTF-8, one header row, comma separator, '.' decimal point, no quoting
// (fields produced here never contain commas or newlines).

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw config_error("missing CSV column: " + name);
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string join_csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  return out;
}

}  // namespace detail

inline std::string render_csv(const CsvTable& t) {
  std::string out = detail::join_csv_line(t.header);
  out.push_back('\n');
  for (const auto& row : t.rows) {
    out += detail::join_csv_line(row);
    out.push_back('\n');
  }
  return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  atomic_write_text(path, render_csv(t));
}

// Rejects rows whose field count differs from the header, naming the row.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open CSV: " + path.string());
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw config_error(path.string() + ": row " + std::to_string(lineno) +
                         " has " + std::to_string(fields.size()) +
                         " fields, expected " +
                         std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw config_error("empty CSV: " + path.string());
  return t;
}

// --- Run manifest -----------------------------------------------------------

// Written into the output directory after all data files, so its checksums
// describe the finished run and a reader can re-launch the job from the
// echoed config.
inline void write_manifest(const std::filesystem::path& out_dir,
                           const std::string& command,
                           const nlohmann::json& config_echo,
                           const std::map<std::string, std::string>& checksums,
                           double wall_time_s) {
  nlohmann::json m;
  m["schema_version"] = kSchemaVersion;
  m["code_version"] = kVersion;
  m["command"] = command;
  m["config"] = config_echo;
  m["wall_time_s"] = wall_time_s;
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [name, sum] : checksums) outs[name] = sum;
  m["outputs"] = outs;
  atomic_write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

// --- Basis rotation artifacts ----------------------------------------------

inline nlohmann::json basis_rotation_json(ChannelKind kind,
                                          const BasisRotation& rot) {
  const int n = rot.n();
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind_name(kind);
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (int r = 0; r < n; ++r) {
    nlohmann::json re_row = nlohmann::json::array();
    nlohmann::json im_row = nlohmann::json::array();
    for (int c = 0; c < n; ++c) {
      re_row.push_back(rot.u(r, c).real());
      im_row.push_back(rot.u(r, c).imag());
    }
    re.push_back(re_row);
    im.push_back(im_row);
  }
  j["unitary_re"] = re;
  j["unitary_im"] = im;
  return j;
}

inline void save_basis_rotation(const std::filesystem::path& path,
                                ChannelKind kind, const BasisRotation& rot) {
  atomic_write_text(path, basis_rotation_json(kind, rot).dump(2) + "\n");
}

inline std::pair<ChannelKind, BasisRotation> load_basis_rotation(
    const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw config_error("bad rotation file " + path.string() + ": " + e.what());
  }
  if (!j.contains("kind") || !j.contains("unitary_re") ||
      !j.contains("unitary_im"))
    throw config_error("rotation file " + path.string() +
                       " missing kind/unitary_re/unitary_im");
  const ChannelKind kind = kind_from_name(j["kind"].get<std::string>());
  const auto& re = j["unitary_re"];
  const auto& im = j["unitary_im"];
  const int n = static_cast<int>(re.size());
  if (n == 0 || static_cast<int>(im.size()) != n)
    throw config_error("rotation file " + path.string() +
                       ": unitary_re/unitary_im shape mismatch");
  BasisRotation rot;
  rot.u = CMatrix::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    if (static_cast<int>(re[r].size()) != n ||
        static_cast<int>(im[r].size()) != n)
      throw config_error("rotation file " + path.string() +
                         ": row " + std::to_string(r) + " has wrong length");
    for (int c = 0; c < n; ++c)
      rot.u(r, c) = cplx(re[r][c].get<double>(), im[r][c].get<double>());
  }
  if (!is_unitary(rot.u, 1e-10))
    throw config_error("rotation file " + path.string() +
                       ": matrix is not unitary");
  return {kind, rot};
}

}  // namespace unravel
