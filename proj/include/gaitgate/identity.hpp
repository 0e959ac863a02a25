#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaitgate/encoder.hpp"
#include "gaitgate/signal.hpp"

namespace gaitgate {

double cosine_similarity(std::span<const float> u, std::span<const float> v);
// 1 - cosine similarity, in [0, 2].
double cosine_distance(std::span<const float> a, std::span<const float> b);
inline double cosine_distance(const Embedding& a, const Embedding& b) {
  return cosine_distance(a.values, b.values);
}

// Unit-length copy; throws kNumeric on a zero vector.
Embedding normalized(std::span<const double> v);

struct Template {
  std::string appearance_id;
  Embedding embedding;            // unit norm
  std::vector<double> raw_mean;   // running mean of member embeddings
  std::size_t sample_count = 1;
  std::string created_at;         // ISO 8601, UTC
};

struct IdentityRecord {
  std::string user_id;
  std::vector<Template> templates;

  Template* find(std::string_view appearance_id);
};

// Single writer; concurrent readers are fine between mutations.
class IdentityStore {
 public:
  static constexpr int kVersion = 1;

  bool contains(std::string_view user_id) const;
  const IdentityRecord& record(std::string_view user_id) const;  // kUnknownIdentity
  IdentityRecord& record(std::string_view user_id);
  const std::map<std::string, IdentityRecord, std::less<>>& records() const { return records_; }

  // Inserts or replaces the template with the same appearance id.
  const Template& put(const std::string& user_id, Template tpl);

  void save(const std::filesystem::path& path) const;
  static IdentityStore load(const std::filesystem::path& path);
  std::string to_json() const;
  static IdentityStore from_json(std::string_view text);

 private:
  std::map<std::string, IdentityRecord, std::less<>> records_;
};

std::string iso8601_utc(std::chrono::system_clock::time_point tp);

inline constexpr double kMinEnrollSeconds = 10.0;

// Template from a set of embeddings: normalized mean.
Template make_template(std::string appearance_id, std::span<const Embedding> members,
                       std::string created_at);

// Slices the session into window_sec windows at 50% overlap, embeds them,
// and stores their normalized mean under (user_id, appearance_id).
const Template& enroll(const Model& model, const StftConfig& stft, const AccelSeries& session,
                       const std::string& user_id, const std::string& appearance_id,
                       double window_sec, IdentityStore& store, std::string created_at);

struct VerifyResult {
  bool accept = false;
  double distance = 0.0;
  std::string matched_appearance;
};

// Minimum cosine distance over the user's templates; accept iff <= threshold.
VerifyResult verify(const IdentityStore& store, std::string_view user_id,
                    const Embedding& probe, double threshold);

struct AdaptiveConfig {
  double trigger_threshold = 0.3;
  double verify_threshold = 0.24;
  std::size_t consecutive_windows = 3;
  std::size_t stability_span = 5;

  void validate() const;
};

struct AdaptiveState {
  std::size_t consecutive_above = 0;
  std::deque<Embedding> buffer;  // most recent above-trigger windows
  std::vector<std::string> added;  // appearance ids created this session
};

enum class AdaptiveEventKind { kNone, kCounted, kEnrolled };

struct AdaptiveEvent {
  AdaptiveEventKind kind = AdaptiveEventKind::kNone;
  double distance = 0.0;
  std::string appearance_id;  // set for kEnrolled
};

std::string_view to_string(AdaptiveEventKind kind);

AdaptiveEvent adaptive_step(AdaptiveState& state, IdentityStore& store,
                            const std::string& user_id, const Embedding& window,
                            bool in_ear, const AdaptiveConfig& cfg,
                            const std::string& timestamp);

// Cumulative-mean update of an existing template with an accepted sample.
const Template& refine_template(IdentityStore& store, const std::string& user_id,
                                const std::string& appearance_id,
                                const Embedding& sample, double verify_threshold);

}  // namespace gaitgate
