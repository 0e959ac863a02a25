#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gaitgate/signal.hpp"
#include "gaitgate/synth.hpp"

namespace gaitgate {

// Session CSV: header "t,x,y,z", one sample per row, shortest round-trip
// decimal formatting.
void write_session_csv(const AccelSeries& series, std::ostream& out);
void write_session_csv(const AccelSeries& series, const std::filesystem::path& path);
AccelSeries read_session_csv(std::istream& in, double fs);
AccelSeries read_session_csv(const std::filesystem::path& path, double fs);

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct Session {
  ManifestEntry meta;
  AccelSeries series;
};

// Manifest plus every referenced CSV, validated.
std::vector<Session> load_dataset(const std::filesystem::path& manifest_path);

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace gaitgate
