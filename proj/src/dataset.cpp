#include "gaitgate/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gaitgate/error.hpp"

namespace gaitgate {

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorKind::kFormat, "line " + std::to_string(line) + ": bad number '" +
                                 std::string(field) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_session_csv(const AccelSeries& series, std::ostream& out) {
  out << "t,x,y,z\n";
  for (const auto& s : series.samples) {
    out << format_double(s.t) << ',' << format_double(s.ax) << ',' << format_double(s.ay)
        << ',' << format_double(s.az) << '\n';
  }
}

void write_session_csv(const AccelSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  write_session_csv(series, out);
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

AccelSeries read_session_csv(std::istream& in, double fs) {
  AccelSeries series;
  series.fs = fs;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,x,y,z") {
    fail(ErrorKind::kFormat, "session csv must start with header 't,x,y,z'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = trim(line);
    if (row.empty()) continue;
    double vals[4];
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      const auto comma = row.find(',', start);
      if ((i < 3) != (comma != std::string_view::npos)) {
        fail(ErrorKind::kFormat, "line " + std::to_string(lineno) + ": expected 4 fields");
      }
      const auto end = i < 3 ? comma : row.size();
      vals[i] = parse_double(trim(row.substr(start, end - start)), lineno);
      start = end + 1;
    }
    series.samples.push_back({vals[0], vals[1], vals[2], vals[3]});
  }
  return series;
}

AccelSeries read_session_csv(const std::filesystem::path& path, double fs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return read_session_csv(in, fs);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    arr.push_back({{"user_id", e.user_id},
                   {"session_id", e.session_id},
                   {"sensor_position", e.sensor_position},
                   {"shoe_id", e.shoe_id},
                   {"surface", e.surface},
                   {"fs", e.fs},
                   {"path", e.path}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << arr.dump(2) << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<ManifestEntry> out;
  try {
    const auto arr = nlohmann::json::parse(in);
    if (!arr.is_array()) fail(ErrorKind::kFormat, "manifest must be a JSON array");
    for (const auto& j : arr) {
      ManifestEntry e;
      e.user_id = j.at("user_id").get<std::string>();
      e.session_id = j.at("session_id").get<std::string>();
      e.sensor_position = j.value("sensor_position", std::string("head"));
      e.shoe_id = j.value("shoe_id", std::string());
      e.surface = j.value("surface", std::string());
      e.fs = j.at("fs").get<double>();
      e.path = j.at("path").get<std::string>();
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return out;
}

std::vector<Session> load_dataset(const std::filesystem::path& manifest_path) {
  auto path = manifest_path;
  if (std::filesystem::is_directory(path)) path /= "manifest.json";
  const auto entries = read_manifest(path);
  const auto root = path.parent_path();
  std::vector<Session> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Session s{e, read_session_csv(root / e.path, e.fs)};
    try {
      validate_series(s.series);
    } catch (const Error& err) {
      fail(ErrorKind::kFormat, e.path + ": " + err.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gaitgate
