#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaitgate/dataset.hpp"
#include "gaitgate/encoder.hpp"
#include "gaitgate/signal.hpp"

namespace gaitgate {

struct EvalConfig {
  std::size_t enroll_windows = 10;
  double enroll_overlap = 0.5;
  std::size_t genuine_trials = 40;
  std::size_t impostor_per_user = 15;
  double grid_step = 0.005;
  double grid_max = 1.0;
  double window_sec = 10.0;
  std::uint64_t rng_seed = 42;
  std::size_t threads = 1;

  void validate() const;
};

// Walking data for one user, as magnitude series.
struct UserSessions {
  std::string user_id;
  std::vector<std::string> session_ids;
  std::vector<MagnitudeSeries> sessions;
  // Each enrollment session contributes one template (appearance).
  std::vector<std::size_t> enroll_sessions{0};
  // Sessions probes are drawn from; empty means all sessions.
  std::vector<std::size_t> probe_sessions;
};

// Groups sessions by user in first-appearance order.
std::vector<UserSessions> group_by_user(std::span<const Session> sessions);

struct WindowRef {
  std::size_t user = 0;     // index into the evaluated users
  std::size_t session = 0;  // index into that user's sessions
  std::size_t start = 0;    // first sample
  std::size_t length = 0;

  bool overlaps(const WindowRef& o) const {
    return user == o.user && session == o.session && start < o.start + o.length &&
           o.start < start + length;
  }
  bool operator==(const WindowRef&) const = default;
};

struct UserTrials {
  std::string user_id;
  std::vector<WindowRef> enrollment;
  std::vector<std::string> appearances;
  std::vector<double> genuine;
  std::vector<WindowRef> genuine_refs;
  std::vector<double> impostor;
  std::vector<WindowRef> impostor_refs;
};

struct TrialSet {
  std::vector<UserTrials> users;

  double max_distance() const;
};

// Per user: templates from the first `enroll_windows` half-overlapping windows
// of each enrollment session; genuine probes sampled without replacement from
// the user's non-overlapping probe windows that do not touch enrollment data;
// `impostor_per_user` probes from every other user's probe pool.
TrialSet build_trials(const Model& model, const StftConfig& stft,
                      std::span<const UserSessions> users, const EvalConfig& cfg);

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Counts confusion_at(const UserTrials& trials, double theta);
// 2TP / (2TP + FP + FN); 0 when TP == 0.
double f1_at_threshold(const UserTrials& trials, double theta);

// 0, step, 2 step, ... up to and including max (within rounding).
std::vector<double> threshold_grid(double step, double max);
// [0, grid_max] unless some distance exceeds it, then [0, 2].
std::vector<double> default_grid(const TrialSet& trials, const EvalConfig& cfg);

struct SweepResult {
  double best_theta = 0.0;
  double mean_f1 = 0.0;
  std::vector<double> per_user_f1;   // at best_theta
  std::vector<double> mean_f1_curve; // per grid point
};
// Ties go to the smallest threshold.
SweepResult sweep_thresholds(const TrialSet& trials, std::span<const double> grid);

struct ErrorRates {
  std::vector<double> far;
  std::vector<double> frr;
  double eer = 0.0;
  double eer_theta = 0.0;
  bool crossed = true;  // false: no sign change on the grid, closest point reported
};
ErrorRates far_frr_eer(const TrialSet& trials, std::span<const double> grid);

struct FoldSpec {
  std::vector<std::vector<std::string>> folds;  // t0 .. t{n-1}
  std::size_t test_fold = 0;
  std::size_t val_fold = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::vector<std::string> unassigned;  // in no fold; part of every training set
  bool val_wrapped = false;  // validation fold wrapped around to the last fold
};

// Shuffles users with the seed and fills n_folds folds of fold_size.
// Experiment k tests on t_k, validates on t_{k-1 mod n} and trains on every
// other user, including those left out of the folds.
std::vector<FoldSpec> kfold_splits(std::span<const std::string> user_ids, std::uint64_t seed,
                                   std::size_t n_folds = 6, std::size_t fold_size = 8);
// Single shuffled split: test first, then validation, the rest trains.
FoldSpec holdout_split(std::span<const std::string> user_ids, std::uint64_t seed,
                       std::size_t val_count, std::size_t test_count);
nlohmann::ordered_json fold_to_json(const FoldSpec& fold);
FoldSpec fold_from_json(const nlohmann::json& j);

struct EvalReport {
  double mean_f1 = 0.0;
  double best_theta = 0.0;
  double eer = 0.0;
  double eer_theta = 0.0;
  bool eer_crossed = true;
  std::vector<double> grid;
  std::vector<double> far_curve;
  std::vector<double> frr_curve;
  struct PerUser {
    std::string user_id;
    double f1 = 0.0;
    std::size_t genuine_trials = 0;
    std::size_t impostor_trials = 0;
    std::size_t enrollment_windows = 0;
    std::size_t templates = 0;
  };
  std::vector<PerUser> per_user;
  EvalConfig config;
};

EvalReport make_report(const TrialSet& trials, const EvalConfig& cfg);
EvalReport evaluate(const Model& model, const StftConfig& stft,
                    std::span<const UserSessions> users, const EvalConfig& cfg);
nlohmann::ordered_json report_to_json(const EvalReport& report);

// CSV: user_id,session_id,window_index,e0..e{D-1}; one row per window.
void export_embeddings(const Model& model, const StftConfig& stft,
                       std::span<const Session> sessions, double window_sec,
                       double overlap_frac, const std::filesystem::path& path,
                       std::size_t threads = 1);

}  // namespace gaitgate
