#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gaitgate/dataset.hpp"
#include "gaitgate/encoder.hpp"
#include "gaitgate/error.hpp"
#include "gaitgate/eval.hpp"
#include "gaitgate/identity.hpp"
#include "gaitgate/model_io.hpp"
#include "gaitgate/parallel.hpp"
#include "gaitgate/synth.hpp"
#include "gaitgate/trainer.hpp"

namespace gaitgate::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct SynthOpts {
  std::size_t users = 20;
  std::size_t conditions = 1;
  std::size_t sessions = 1;
  double duration = 300.0;
  double fs = 100.0;
  std::uint64_t seed = 42;
  double shoe_strength = 0.25;
  double surface_strength = 0.10;
  std::string out;
};

struct JourneyOpts {
  std::size_t user = 0;
  std::uint64_t seed = 42;
  std::uint64_t noise_seed = 1;
  std::string preset = "three-shift";
  double segment_sec = 120.0;
  double fs = 100.0;
  std::string out;
  std::string annotations;
};

struct TrainOpts {
  std::string data;
  std::string out;
  std::size_t folds = 1;
  std::optional<std::size_t> only_fold;
  std::size_t fold_size = 8;
  std::size_t val_users = 4;
  std::size_t test_users = 4;
  TrainConfig train;
};

struct ModelWindowOpts {
  std::string model;
  double window_sec = 10.0;
};

struct EnrollOpts {
  ModelWindowOpts mw;
  std::string session;
  double fs = 100.0;
  std::string user;
  std::string appearance = "default";
  std::string store;
  std::string created_at;
};

struct VerifyOpts {
  ModelWindowOpts mw;
  std::string session;
  double fs = 100.0;
  std::string user;
  std::string store;
  double threshold = 0.24;
  double start_sec = 0.0;
};

struct EvaluateOpts {
  ModelWindowOpts mw;
  std::string data;
  std::string report;
  std::string split;
  std::size_t fold = 0;
  std::vector<std::string> users;
  EvalConfig eval;
};

struct AdaptiveOpts {
  ModelWindowOpts mw;
  std::string journey;
  double fs = 100.0;
  std::string store;
  std::string out_store;
  std::string user;
  AdaptiveConfig cfg;
  double overlap = 0.5;
  bool off_ear = false;
  std::int64_t start_epoch = 0;
  std::string events;
  std::vector<std::string> probes;
  std::vector<std::string> impostors;
};

struct ExportOpts {
  ModelWindowOpts mw;
  std::string data;
  std::string out;
  double overlap = 0.5;
};

std::size_t window_samples(double window_sec, double fs) {
  return static_cast<std::size_t>(std::llround(window_sec * fs));
}

void check_window(double window_sec, double fs, const StftConfig& stft) {
  require(window_sec > 0.0, "--window-sec must be positive");
  if (window_samples(window_sec, fs) < stft.frame_len) {
    std::ostringstream msg;
    msg << "window of " << window_sec << " s (" << window_samples(window_sec, fs)
        << " samples) is shorter than one STFT frame (" << stft.frame_len << " samples)";
    fail(ErrorKind::kInvalidArgument, msg.str());
  }
}

// Loads a model and checks the window length yields its input shape.
Model load_for_window(const ModelWindowOpts& o, double fs, const StftConfig& stft) {
  check_window(o.window_sec, fs, stft);
  Model model = load_model(o.model);
  const std::size_t frames = stft.frames_for(window_samples(o.window_sec, fs));
  if (model.config.input_freq != stft.freq_bins() || model.config.input_frames != frames) {
    std::ostringstream msg;
    msg << "model expects " << model.config.input_freq << "x" << model.config.input_frames
        << " spectrograms but a " << o.window_sec << " s window gives " << stft.freq_bins()
        << "x" << frames << "; pass the training --window-sec";
    fail(ErrorKind::kInvalidArgument, msg.str());
  }
  return model;
}

double dataset_fs(const std::vector<Session>& sessions) {
  require(!sessions.empty(), "dataset has no sessions");
  const double fs = sessions.front().meta.fs;
  for (const auto& s : sessions) {
    require(s.meta.fs == fs, "dataset mixes sample rates");
  }
  return fs;
}

std::vector<std::string> ids_of(const std::vector<UserSessions>& users) {
  std::vector<std::string> ids;
  for (const auto& u : users) ids.push_back(u.user_id);
  return ids;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::kIo, "write failed for " + path.string());
}

Embedding embed_window(const Model& model, const StftConfig& stft, const MagnitudeSeries& w) {
  return forward(model, window_spectrogram(w.values, stft));
}

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  DatasetOptions d;
  d.n_users = o.users;
  d.sessions_per_user = o.sessions;
  d.conditions = condition_grid(o.conditions);
  d.duration_sec = o.duration;
  d.fs = o.fs;
  d.master_seed = o.seed;
  d.shoe_strength = o.shoe_strength;
  d.surface_strength = o.surface_strength;
  const auto entries = generate_dataset(d, o.out);
  out << "wrote " << entries.size() << " sessions for " << o.users << " users to " << o.out
      << "\n";
  return kOk;
}

int cmd_journey(const JourneyOpts& o, std::ostream& out) {
  JourneySpec spec;
  if (o.preset == "three-shift") {
    spec = three_shift_journey(o.segment_sec, o.seed);
  } else {
    spec = baseline_journey(o.segment_sec);
  }
  const GaitProfile profile = generate_profile(o.seed + o.user);
  const Journey j = synth_journey(profile, spec, o.fs, o.noise_seed);
  write_session_csv(j.series, fs::path(o.out));
  fs::path ann = o.annotations.empty() ? fs::path(o.out).replace_extension(".json")
                                       : fs::path(o.annotations);
  write_text(ann, annotations_to_json(j.annotations).dump(2) + "\n");
  out << "wrote " << j.series.samples.size() << " samples (" << j.annotations.size()
      << " segments) for " << user_id_for(o.user) << " to " << o.out << "\n";
  return kOk;
}

int cmd_train(TrainOpts o, std::size_t threads, std::ostream& out) {
  const StftConfig stft;
  o.train.threads = threads;
  o.train.validate();
  require(o.folds >= 1, "--folds must be at least 1");

  const auto sessions = load_dataset(o.data);
  const double fs = dataset_fs(sessions);
  check_window(o.train.window_sec, fs, stft);
  const auto users = group_by_user(sessions);
  const auto ids = ids_of(users);

  std::vector<FoldSpec> splits;
  if (o.folds == 1) {
    splits.push_back(holdout_split(ids, o.train.rng_seed, o.val_users, o.test_users));
  } else {
    splits = kfold_splits(ids, o.train.rng_seed, o.folds, o.fold_size);
  }
  if (o.only_fold) require(*o.only_fold < splits.size(), "--fold is out of range");

  EncoderConfig enc;
  enc.input_freq = stft.freq_bins();
  enc.input_frames = stft.frames_for(window_samples(o.train.window_sec, fs));
  const auto full = enc.conv_channels;
  enc.conv_channels = fit_stages_to_input(full, enc.input_freq, enc.input_frames);
  enc.init_seed = o.train.rng_seed;
  if (enc.conv_channels.size() < full.size()) {
    out << "note: " << enc.input_freq << "x" << enc.input_frames << " input keeps "
        << enc.conv_channels.size() << " of " << full.size() << " conv stages\n";
  }
  enc.validate();

  EvalConfig eval;
  eval.window_sec = o.train.window_sec;
  eval.rng_seed = o.train.rng_seed;
  eval.threads = threads;

  const fs::path dir(o.out);
  fs::create_directories(dir);
  ordered_json split_doc = {{"seed", o.train.rng_seed}, {"splits", ordered_json::array()}};
  for (const auto& s : splits) split_doc["splits"].push_back(fold_to_json(s));
  write_text(dir / "splits.json", split_doc.dump(2) + "\n");

  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) fail(ErrorKind::kIo, "cannot write " + (dir / "train_log.jsonl").string());

  for (std::size_t k = 0; k < splits.size(); ++k) {
    if (o.only_fold && *o.only_fold != k) continue;
    auto on_epoch = [&](const EpochLog& e, const Model&) {
      EpochLog tagged = e;
      tagged.fold = k;
      log << epoch_log_to_json(tagged).dump() << "\n";
      log.flush();
      out << "fold " << k << " epoch " << e.epoch << " loss " << e.mean_loss << " val_f1 "
          << e.val_f1 << "\n";
    };
    const FitResult r = fit_split(users, splits[k], enc, o.train, stft, eval, on_epoch);
    const fs::path model_path =
        splits.size() == 1 ? dir / "model.gait" : dir / ("model_t" + std::to_string(k) + ".gait");
    save_model(r.best, model_path);
    out << "fold " << k << " best epoch " << r.best_epoch << " val_f1 " << r.best_val_f1
        << " -> " << model_path.string() << "\n";
  }
  return kOk;
}

IdentityStore load_store_or_empty(const std::string& path) {
  if (fs::exists(path)) return IdentityStore::load(path);
  return IdentityStore{};
}

int cmd_enroll(const EnrollOpts& o, std::ostream& out) {
  const StftConfig stft;
  const Model model = load_for_window(o.mw, o.fs, stft);
  const AccelSeries series = read_session_csv(fs::path(o.session), o.fs);
  IdentityStore store = load_store_or_empty(o.store);
  const std::string created =
      o.created_at.empty() ? iso8601_utc(std::chrono::system_clock::now()) : o.created_at;
  const Template& t =
      enroll(model, stft, series, o.user, o.appearance, o.mw.window_sec, store, created);
  store.save(o.store);
  out << "enrolled " << o.user << "/" << t.appearance_id << " from " << t.sample_count
      << " windows\n";
  return kOk;
}

int cmd_verify(const VerifyOpts& o, std::ostream& out) {
  const StftConfig stft;
  require(o.threshold >= 0.0 && o.threshold <= 2.0, "--threshold must be in [0, 2]");
  const IdentityStore store = IdentityStore::load(o.store);
  store.record(o.user);  // unknown users fail before any model work
  const Model model = load_for_window(o.mw, o.fs, stft);
  const AccelSeries series = read_session_csv(fs::path(o.session), o.fs);
  const MagnitudeSeries mag = magnitude(series);
  const auto start = static_cast<std::size_t>(std::llround(o.start_sec * o.fs));
  const std::size_t len = window_samples(o.mw.window_sec, o.fs);
  require(o.start_sec >= 0.0 && start + len <= mag.size(),
          "session has no full window at --start-sec");
  MagnitudeSeries w;
  w.fs = mag.fs;
  w.start_index = start;
  w.values.assign(mag.values.begin() + static_cast<std::ptrdiff_t>(start),
                  mag.values.begin() + static_cast<std::ptrdiff_t>(start + len));
  const VerifyResult r = verify(store, o.user, embed_window(model, stft, w), o.threshold);
  out << ordered_json{{"accept", r.accept},
                      {"distance", r.distance},
                      {"matched_appearance", r.matched_appearance}}
             .dump()
      << "\n";
  return r.accept ? kOk : kReject;
}

int cmd_evaluate(EvaluateOpts o, std::size_t threads, std::ostream& out) {
  const StftConfig stft;
  o.eval.window_sec = o.mw.window_sec;
  o.eval.threads = threads;
  o.eval.validate();
  const auto sessions = load_dataset(o.data);
  const double fs = dataset_fs(sessions);
  const Model model = load_for_window(o.mw, fs, stft);
  auto users = group_by_user(sessions);
  if (!o.split.empty()) {
    std::ifstream f(o.split);
    if (!f) fail(ErrorKind::kIo, "cannot read " + o.split);
    const auto doc = nlohmann::json::parse(f);
    const auto& list = doc.at("splits");
    require(o.fold < list.size(), "--fold is out of range");
    users = select_users(users, fold_from_json(list.at(o.fold)).test);
  } else if (!o.users.empty()) {
    users = select_users(users, o.users);
  }
  const EvalReport rep = evaluate(model, stft, users, o.eval);
  const std::string text = report_to_json(rep).dump(2) + "\n";
  if (o.report.empty()) {
    out << text;
  } else {
    write_text(o.report, text);
    out << "users " << rep.per_user.size() << " mean_f1 " << rep.mean_f1 << " best_theta "
        << rep.best_theta << " eer " << rep.eer << "\n";
  }
  return kOk;
}

// Fraction of non-overlapping windows accepted for `user`.
double accept_rate(const Model& model, const StftConfig& stft, const IdentityStore& store,
                   const std::string& user, const std::vector<std::string>& paths, double fs,
                   double window_sec, double threshold) {
  std::size_t accepted = 0;
  std::size_t total = 0;
  for (const auto& p : paths) {
    const auto windows = slice_windows(magnitude(read_session_csv(fs::path(p), fs)), window_sec, 0.0);
    for (const auto& w : windows) {
      accepted += verify(store, user, embed_window(model, stft, w), threshold).accept ? 1 : 0;
      ++total;
    }
  }
  require(total > 0, "probe journeys yield no windows");
  return static_cast<double>(accepted) / static_cast<double>(total);
}

int cmd_adaptive(const AdaptiveOpts& o, std::ostream& out) {
  o.cfg.validate();
  require(o.overlap >= 0.0 && o.overlap < 1.0, "--overlap must be in [0, 1)");
  const StftConfig stft;
  IdentityStore store = IdentityStore::load(o.store);
  store.record(o.user);
  const Model model = load_for_window(o.mw, o.fs, stft);
  const AccelSeries journey = read_session_csv(fs::path(o.journey), o.fs);
  const auto windows = slice_windows(magnitude(journey), o.mw.window_sec, o.overlap);

  std::ofstream events_file;
  if (!o.events.empty()) {
    events_file.open(o.events, std::ios::binary);
    if (!events_file) fail(ErrorKind::kIo, "cannot write " + o.events);
  }
  std::ostream& events = o.events.empty() ? out : events_file;

  AdaptiveState state;
  const auto base = std::chrono::system_clock::time_point{} + std::chrono::seconds(o.start_epoch);
  for (const auto& w : windows) {
    const auto at = base + std::chrono::seconds(static_cast<std::int64_t>(std::floor(w.start_sec())));
    const AdaptiveEvent ev = adaptive_step(state, store, o.user, embed_window(model, stft, w),
                                           !o.off_ear, o.cfg, iso8601_utc(at));
    ordered_json line = {{"t_start", w.start_sec()},
                         {"distance", ev.distance},
                         {"event", std::string(to_string(ev.kind))}};
    if (!ev.appearance_id.empty()) line["appearance_id"] = ev.appearance_id;
    events << line.dump() << "\n";
  }
  if (!o.out_store.empty()) store.save(o.out_store);

  ordered_json summary = {{"user", o.user},
                          {"windows", windows.size()},
                          {"adaptive_templates", state.added.size()},
                          {"added", state.added}};
  if (!o.probes.empty()) {
    summary["recall"] = accept_rate(model, stft, store, o.user, o.probes, o.fs, o.mw.window_sec,
                                    o.cfg.verify_threshold);
  }
  if (!o.impostors.empty()) {
    summary["far"] = accept_rate(model, stft, store, o.user, o.impostors, o.fs, o.mw.window_sec,
                                 o.cfg.verify_threshold);
  }
  out << summary.dump() << "\n";
  return kOk;
}

int cmd_export(const ExportOpts& o, std::size_t threads, std::ostream& out) {
  const StftConfig stft;
  const auto sessions = load_dataset(o.data);
  const Model model = load_for_window(o.mw, dataset_fs(sessions), stft);
  export_embeddings(model, stft, sessions, o.mw.window_sec, o.overlap, o.out, threads);
  out << "wrote embeddings for " << sessions.size() << " sessions to " << o.out << "\n";
  return kOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return kBadArgs;
    case ErrorKind::kIo:
    case ErrorKind::kFormat: return kIoError;
    case ErrorKind::kNumeric: return kNumericError;
    case ErrorKind::kUnknownIdentity: return kUnknownUser;
  }
  return kIoError;
}

void add_model_window(CLI::App* sub, ModelWindowOpts& o) {
  sub->add_option("--model", o.model, "Model file (.gait)")->required();
  sub->add_option("--window-sec", o.window_sec, "Window length used in training, seconds");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gaitgate: head-worn gait authentication toolkit", "gaitgate"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config file; one [section] per subcommand");
  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (GAITGATE_THREADS if unset)")
      ->check(CLI::PositiveNumber);

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--users", so.users, "Number of users")->check(CLI::Range(1, 100000));
  synth->add_option("--conditions", so.conditions, "Conditions per user (shoe x surface grid)")
      ->check(CLI::Range(1, 1000));
  synth->add_option("--sessions", so.sessions, "Sessions per condition")
      ->check(CLI::Range(1, 1000));
  synth->add_option("--duration", so.duration, "Session length, seconds")
      ->check(CLI::Range(1.0, 1e6));
  synth->add_option("--fs", so.fs, "Sample rate, Hz")->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed, "Master seed");
  synth->add_option("--shoe-strength", so.shoe_strength, "Shoe amplitude perturbation")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--surface-strength", so.surface_strength, "Surface perturbation")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", so.out, "Output directory")->required();

  JourneyOpts jo;
  auto* journey = app.add_subcommand("journey", "Generate one user's multi-condition walk");
  journey->add_option("--user", jo.user, "User index in the corpus");
  journey->add_option("--seed", jo.seed, "Corpus master seed");
  journey->add_option("--noise-seed", jo.noise_seed, "Seed for sensor noise");
  journey->add_option("--preset", jo.preset, "Journey script")
      ->check(CLI::IsMember({"three-shift", "baseline"}));
  journey->add_option("--segment-sec", jo.segment_sec, "Segment length, seconds")
      ->check(CLI::PositiveNumber);
  journey->add_option("--fs", jo.fs, "Sample rate, Hz")->check(CLI::PositiveNumber);
  journey->add_option("--out", jo.out, "Output CSV")->required();
  journey->add_option("--annotations", jo.annotations, "Segment JSON (default: <out>.json)");

  TrainOpts to;
  auto* train = app.add_subcommand("train", "Train the encoder");
  train->add_option("--data", to.data, "Dataset directory or manifest")->required();
  train->add_option("--out", to.out, "Output directory")->required();
  train->add_option("--folds", to.folds, "1 = single holdout split, n > 1 = n-fold rotation")
      ->check(CLI::Range(1, 1000));
  train->add_option("--fold", to.only_fold, "Run only this fold");
  train->add_option("--fold-size", to.fold_size, "Users per fold")->check(CLI::PositiveNumber);
  train->add_option("--val-users", to.val_users, "Validation users (holdout split)");
  train->add_option("--test-users", to.test_users, "Test users (holdout split)");
  train->add_option("--window-sec", to.train.window_sec, "Window length, seconds");
  train->add_option("--epochs", to.train.epochs, "Epochs");
  train->add_option("--batches", to.train.batches_per_epoch, "Batches per epoch");
  train->add_option("--pairs", to.train.pairs_per_batch, "Positive pairs per batch");
  train->add_option("--lr", to.train.learning_rate, "Adam learning rate");
  train->add_option("--temperature", to.train.temperature, "NT-Xent temperature");
  train->add_option("--dropout", to.train.dropout_p, "Pixel dropout probability");
  train->add_option("--seed", to.train.rng_seed, "Seed for splits, init and batches");

  EnrollOpts eo;
  auto* enroll_cmd = app.add_subcommand("enroll", "Enroll a walking session as a template");
  add_model_window(enroll_cmd, eo.mw);
  enroll_cmd->add_option("--session", eo.session, "Session CSV")->required();
  enroll_cmd->add_option("--fs", eo.fs, "Sample rate, Hz")->check(CLI::PositiveNumber);
  enroll_cmd->add_option("--user", eo.user, "User id")->required();
  enroll_cmd->add_option("--appearance", eo.appearance, "Appearance id");
  enroll_cmd->add_option("--store", eo.store, "Identity store JSON")->required();
  enroll_cmd->add_option("--created-at", eo.created_at, "Template timestamp (default: now)");

  VerifyOpts vo;
  auto* verify_cmd = app.add_subcommand("verify", "Verify one window against a user");
  add_model_window(verify_cmd, vo.mw);
  verify_cmd->add_option("--session", vo.session, "Session CSV")->required();
  verify_cmd->add_option("--fs", vo.fs, "Sample rate, Hz")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--user", vo.user, "Claimed user id")->required();
  verify_cmd->add_option("--store", vo.store, "Identity store JSON")->required();
  verify_cmd->add_option("--threshold", vo.threshold, "Accept at cosine distance <= threshold");
  verify_cmd->add_option("--start-sec", vo.start_sec, "Window start within the session");

  EvaluateOpts vo2;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run the verification protocol");
  add_model_window(evaluate_cmd, vo2.mw);
  evaluate_cmd->add_option("--data", vo2.data, "Dataset directory or manifest")->required();
  evaluate_cmd->add_option("--report", vo2.report, "Report JSON (default: stdout)");
  evaluate_cmd->add_option("--split", vo2.split, "splits.json from train; evaluates test users");
  evaluate_cmd->add_option("--fold", vo2.fold, "Split index within --split");
  auto* users_opt =
      evaluate_cmd->add_option("--users", vo2.users, "Explicit user ids")->delimiter(',');
  evaluate_cmd->add_option("--enroll-windows", vo2.eval.enroll_windows, "Enrollment windows");
  evaluate_cmd->add_option("--genuine", vo2.eval.genuine_trials, "Genuine probes per user");
  evaluate_cmd->add_option("--impostor", vo2.eval.impostor_per_user,
                           "Impostor probes per other user");
  evaluate_cmd->add_option("--grid-step", vo2.eval.grid_step, "Threshold grid step");
  evaluate_cmd->add_option("--seed", vo2.eval.rng_seed, "Probe sampling seed");
  users_opt->excludes(evaluate_cmd->get_option("--split"));

  AdaptiveOpts ao;
  auto* adaptive = app.add_subcommand("adaptive", "Simulate adaptive enrollment on a journey");
  add_model_window(adaptive, ao.mw);
  adaptive->add_option("--journey", ao.journey, "Journey CSV")->required();
  adaptive->add_option("--fs", ao.fs, "Sample rate, Hz")->check(CLI::PositiveNumber);
  adaptive->add_option("--store", ao.store, "Identity store JSON")->required();
  adaptive->add_option("--out-store", ao.out_store, "Write the updated store here");
  adaptive->add_option("--user", ao.user, "User wearing the device")->required();
  adaptive->add_option("--trigger", ao.cfg.trigger_threshold, "Distance that counts a window");
  adaptive->add_option("--verify", ao.cfg.verify_threshold, "Verification threshold");
  adaptive->add_option("--consecutive", ao.cfg.consecutive_windows,
                       "Consecutive windows before enrolling");
  adaptive->add_option("--span", ao.cfg.stability_span, "Windows kept for medoid selection");
  adaptive->add_option("--overlap", ao.overlap, "Window overlap fraction");
  adaptive->add_flag("--off-ear", ao.off_ear, "Device not worn: never adapt");
  adaptive->add_option("--start-epoch", ao.start_epoch, "Journey start, Unix seconds");
  adaptive->add_option("--events", ao.events, "Event log JSONL (default: stdout)");
  adaptive->add_option("--probe", ao.probes, "Repeat journeys for recall");
  adaptive->add_option("--impostor", ao.impostors, "Other users' journeys for FAR");

  ExportOpts xo;
  auto* export_cmd = app.add_subcommand("export", "Write window embeddings as CSV");
  add_model_window(export_cmd, xo.mw);
  export_cmd->add_option("--data", xo.data, "Dataset directory or manifest")->required();
  export_cmd->add_option("--out", xo.out, "Output CSV")->required();
  export_cmd->add_option("--overlap", xo.overlap, "Window overlap fraction");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadArgs;
  }

  try {
    if (*synth) return cmd_synth(so, out);
    if (*journey) return cmd_journey(jo, out);
    if (*train) return cmd_train(to, threads, out);
    if (*enroll_cmd) return cmd_enroll(eo, out);
    if (*verify_cmd) return cmd_verify(vo, out);
    if (*evaluate_cmd) return cmd_evaluate(vo2, threads, out);
    if (*adaptive) return cmd_adaptive(ao, out);
    if (*export_cmd) return cmd_export(xo, threads, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return kIoError;
  }
  return kBadArgs;
}

}  // namespace gaitgate::cli
