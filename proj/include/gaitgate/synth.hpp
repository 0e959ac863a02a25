#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaitgate/signal.hpp"

namespace gaitgate {

inline constexpr std::size_t kHarmonics = 5;

// Harmonic-sum walking model. Per axis:
//   gravity[axis] + sum_k amp[k][axis] * sin(2 pi k f0 t + phase[k][axis])
//   + N(0, noise_sigma)
struct GaitProfile {
  std::uint64_t user_seed = 0;
  double f0 = 1.8;  // step frequency, Hz
  std::array<std::array<double, 3>, kHarmonics> amp{};
  std::array<std::array<double, 3>, kHarmonics> phase{};
  double noise_sigma = 0.02;
  std::array<double, 3> gravity{0.0, 0.0, 1.0};

  bool operator==(const GaitProfile&) const = default;
};

// Multiplicative/additive perturbation of a profile for one walking condition.
struct ConditionModifier {
  std::string label = "baseline";
  std::array<double, kHarmonics> amp_scale{1.0, 1.0, 1.0, 1.0, 1.0};
  double f0_offset = 0.0;
  double noise_scale = 1.0;

  void validate() const;
};

struct JourneySegment {
  ConditionModifier modifier;
  double duration_sec = 60.0;
};

struct JourneySpec {
  std::vector<JourneySegment> segments;
};

struct SegmentAnnotation {
  double t_start = 0.0;
  std::string label;
};

struct Journey {
  AccelSeries series;
  std::vector<SegmentAnnotation> annotations;
};

// Draw order from Rng(user_seed), all documented ranges:
//   f0 ~ U[1.5, 2.3]
//   for k in 1..5, axis in (x, y, z):
//     amp = axis_scale * LogNormal(0, 0.5) / k, axis_scale = (0.08, 0.06, 0.20) g
//     phase ~ U[0, 2 pi)
//   noise_sigma ~ U[0.01, 0.03] g
//   tilt ~ U[0, 0.35] rad, azimuth ~ U[0, 2 pi);
//   gravity = (sin tilt cos az, sin tilt sin az, cos tilt) g
GaitProfile generate_profile(std::uint64_t user_seed);

ConditionModifier baseline_modifier();
// Per-harmonic amplitude scale 1 + strength * U[-1, 1], f0 offset U[-0.05, 0.05].
ConditionModifier shoe_modifier(std::uint64_t seed, double strength = 0.25,
                                std::string label = "shoe");
// Harmonics 3..5 scaled by 1 + strength * U[-1, 1]; noise scaled by
// 1 + 5 * strength * U[0, 1].
ConditionModifier surface_modifier(std::uint64_t seed, double strength = 0.10,
                                   std::string label = "surface");
// Uniform amplitude scale and a step-frequency shift (pace, incline).
ConditionModifier pace_modifier(double f0_offset, double amp_scale,
                                std::string label = "pace");
ConditionModifier compose(const ConditionModifier& a, const ConditionModifier& b);

// Standard condition grid used by generate_dataset: shoe index and surface
// index, 0 meaning the user's baseline.
struct ConditionSpec {
  std::size_t shoe = 0;
  std::size_t surface = 0;

  std::string shoe_id() const { return "shoe" + std::to_string(shoe); }
  std::string surface_id() const { return "surface" + std::to_string(surface); }
};
ConditionModifier condition_modifier(const GaitProfile& profile, const ConditionSpec& c,
                                     double shoe_strength = 0.25,
                                     double surface_strength = 0.10);
// c = 0..count-1 maps to (shoe = c / 2, surface = c % 2).
std::vector<ConditionSpec> condition_grid(std::size_t count);

// Level walking, then brisk pace, uphill and grass downhill, each
// `segment_sec` long. The grass segment's surface draw comes from `seed`.
JourneySpec three_shift_journey(double segment_sec = 120.0, std::uint64_t seed = 42);
// One baseline segment.
JourneySpec baseline_journey(double duration_sec);
nlohmann::ordered_json annotations_to_json(const std::vector<SegmentAnnotation>& annotations);

AccelSeries synth_session(const GaitProfile& profile, const ConditionModifier& modifier,
                          double duration_sec, double fs, std::uint64_t session_seed);

// Segments joined with a 1 s linear parameter crossfade starting at each
// boundary. Step phase is integrated so the waveform stays continuous.
Journey synth_journey(const GaitProfile& profile, const JourneySpec& journey, double fs,
                      std::uint64_t seed);

struct ManifestEntry {
  std::string user_id;
  std::string session_id;
  std::string sensor_position = "head";
  std::string shoe_id;
  std::string surface;
  double fs = 100.0;
  std::string path;  // relative to the manifest directory

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetOptions {
  std::size_t n_users = 20;
  std::size_t sessions_per_user = 1;
  std::vector<ConditionSpec> conditions = condition_grid(1);
  double duration_sec = 300.0;
  double fs = 100.0;
  std::uint64_t master_seed = 42;
  double shoe_strength = 0.25;
  double surface_strength = 0.10;
};

std::string user_id_for(std::size_t index);
std::uint64_t session_seed_for(std::uint64_t user_seed, std::size_t condition,
                               std::size_t session);

// In-memory corpus; generate_dataset writes exactly these sessions.
struct SynthSession {
  ManifestEntry meta;
  AccelSeries series;
};
std::vector<SynthSession> synth_corpus(const DatasetOptions& opts);

// Writes <out_dir>/sessions/*.csv and <out_dir>/manifest.json.
std::vector<ManifestEntry> generate_dataset(const DatasetOptions& opts,
                                            const std::filesystem::path& out_dir);

}  // namespace gaitgate
