#include "gaitgate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "gaitgate/error.hpp"
#include "gaitgate/identity.hpp"
#include "gaitgate/parallel.hpp"
#include "gaitgate/rng.hpp"

namespace gaitgate {

namespace {

std::size_t window_length(double window_sec, double fs) {
  return static_cast<std::size_t>(std::llround(window_sec * fs));
}

struct UserPlan {
  std::vector<std::vector<WindowRef>> enroll;  // per enrollment session
  std::vector<WindowRef> pool;                 // probe candidates
};

UserPlan plan_user(const UserSessions& u, std::size_t user_index, const EvalConfig& cfg) {
  UserPlan plan;
  require(!u.sessions.empty(), "user " + u.user_id + " has no sessions");
  std::vector<std::pair<std::size_t, std::size_t>> blocked;  // (session, end sample)
  for (std::size_t s : u.enroll_sessions) {
    require(s < u.sessions.size(), "user " + u.user_id + ": enrollment session index out of range");
    const auto windows = slice_windows(u.sessions[s], cfg.window_sec, cfg.enroll_overlap);
    if (windows.size() < cfg.enroll_windows) {
      fail(ErrorKind::kInvalidArgument,
           "user " + u.user_id + ": session " + std::to_string(s) + " yields " +
               std::to_string(windows.size()) + " enrollment windows, need " +
               std::to_string(cfg.enroll_windows));
    }
    std::vector<WindowRef> refs;
    for (std::size_t i = 0; i < cfg.enroll_windows; ++i) {
      refs.push_back({user_index, s, windows[i].start_index, windows[i].size()});
    }
    blocked.emplace_back(s, refs.back().start + refs.back().length);
    plan.enroll.push_back(std::move(refs));
  }
  std::vector<std::size_t> probe_sessions = u.probe_sessions;
  if (probe_sessions.empty()) {
    for (std::size_t s = 0; s < u.sessions.size(); ++s) probe_sessions.push_back(s);
  }
  for (std::size_t s : probe_sessions) {
    require(s < u.sessions.size(), "user " + u.user_id + ": probe session index out of range");
    std::size_t first_free = 0;
    for (const auto& [bs, end] : blocked) {
      if (bs == s) first_free = std::max(first_free, end);
    }
    const std::size_t len = window_length(cfg.window_sec, u.sessions[s].fs);
    for (std::size_t start = first_free; start + len <= u.sessions[s].size(); start += len) {
      plan.pool.push_back({user_index, s, start, len});
    }
  }
  return plan;
}

struct RefKey {
  bool operator()(const WindowRef& a, const WindowRef& b) const {
    return std::tie(a.user, a.session, a.start, a.length) <
           std::tie(b.user, b.session, b.start, b.length);
  }
};

// Per-user rates at every grid point; `far` is per-user impostor accepts.
void user_rates(const UserTrials& t, std::span<const double> grid, std::vector<double>& far,
                std::vector<double>& frr) {
  std::vector<double> g = t.genuine;
  std::vector<double> im = t.impostor;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  far.resize(grid.size());
  frr.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto acc_g = static_cast<double>(std::upper_bound(g.begin(), g.end(), grid[i]) - g.begin());
    const auto acc_i = static_cast<double>(std::upper_bound(im.begin(), im.end(), grid[i]) - im.begin());
    far[i] = acc_i / static_cast<double>(im.size());
    frr[i] = 1.0 - acc_g / static_cast<double>(g.size());
  }
}

}  // namespace

void EvalConfig::validate() const {
  require(enroll_windows >= 1, "enroll_windows must be at least 1");
  require(enroll_overlap >= 0.0 && enroll_overlap < 1.0, "enroll_overlap must be in [0, 1)");
  require(genuine_trials >= 1 && impostor_per_user >= 1, "trial counts must be at least 1");
  require(grid_step > 0.0 && grid_max > 0.0, "threshold grid must be positive");
  require(window_sec > 0.0, "window_sec must be positive");
}

std::vector<UserSessions> group_by_user(std::span<const Session> sessions) {
  std::vector<UserSessions> out;
  std::map<std::string, std::size_t> index;
  for (const auto& s : sessions) {
    auto [it, inserted] = index.emplace(s.meta.user_id, out.size());
    if (inserted) out.push_back(UserSessions{s.meta.user_id, {}, {}, {0}, {}});
    auto& u = out[it->second];
    u.session_ids.push_back(s.meta.session_id);
    u.sessions.push_back(magnitude(s.series));
  }
  return out;
}

double TrialSet::max_distance() const {
  double m = 0.0;
  for (const auto& u : users) {
    for (double d : u.genuine) m = std::max(m, d);
    for (double d : u.impostor) m = std::max(m, d);
  }
  return m;
}

TrialSet build_trials(const Model& model, const StftConfig& stft,
                      std::span<const UserSessions> users, const EvalConfig& cfg) {
  cfg.validate();
  require(!users.empty(), "no users to evaluate");
  std::vector<UserPlan> plans;
  for (std::size_t u = 0; u < users.size(); ++u) plans.push_back(plan_user(users[u], u, cfg));

  TrialSet out;
  out.users.resize(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    auto& t = out.users[u];
    t.user_id = users[u].user_id;
    const auto& plan = plans[u];
    if (plan.pool.size() < cfg.genuine_trials) {
      fail(ErrorKind::kInvalidArgument,
           "user " + t.user_id + ": " + std::to_string(plan.pool.size()) +
               " probe windows available, need " + std::to_string(cfg.genuine_trials) +
               " genuine trials");
    }
    Rng rng(derive_seed(cfg.rng_seed, u));
    for (auto i : rng.sample_without_replacement(plan.pool.size(), cfg.genuine_trials)) {
      t.genuine_refs.push_back(plan.pool[i]);
    }
    for (std::size_t v = 0; v < users.size(); ++v) {
      if (v == u) continue;
      const auto& pool = plans[v].pool;
      if (pool.size() < cfg.impostor_per_user) {
        fail(ErrorKind::kInvalidArgument,
             "user " + users[v].user_id + ": " + std::to_string(pool.size()) +
                 " probe windows available, need " + std::to_string(cfg.impostor_per_user) +
                 " impostor trials");
      }
      for (auto i : rng.sample_without_replacement(pool.size(), cfg.impostor_per_user)) {
        t.impostor_refs.push_back(pool[i]);
      }
    }
    for (const auto& e : plan.enroll) t.enrollment.insert(t.enrollment.end(), e.begin(), e.end());
  }

  // Embed every distinct window once.
  std::map<WindowRef, std::size_t, RefKey> slot;
  std::vector<WindowRef> todo;
  auto want = [&](const WindowRef& r) {
    if (slot.emplace(r, todo.size()).second) todo.push_back(r);
  };
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (const auto& e : out.users[u].enrollment) want(e);
    for (const auto& r : out.users[u].genuine_refs) want(r);
    for (const auto& r : out.users[u].impostor_refs) want(r);
  }
  std::vector<Embedding> embs(todo.size());
  parallel_for(todo.size(), cfg.threads, [&](std::size_t i) {
    const auto& r = todo[i];
    const auto& series = users[r.user].sessions[r.session].values;
    const std::span<const double> window(series.data() + r.start, r.length);
    embs[i] = forward(model, window_spectrogram(window, stft));
  });

  for (std::size_t u = 0; u < users.size(); ++u) {
    auto& t = out.users[u];
    std::vector<Template> templates;
    for (std::size_t e = 0; e < plans[u].enroll.size(); ++e) {
      std::vector<Embedding> members;
      for (const auto& r : plans[u].enroll[e]) members.push_back(embs[slot.at(r)]);
      const std::size_t sess = users[u].enroll_sessions[e];
      const std::string id =
          sess < users[u].session_ids.size() ? users[u].session_ids[sess] : "session" + std::to_string(sess);
      templates.push_back(make_template(id, members, ""));
      t.appearances.push_back(id);
    }
    auto dist = [&](const WindowRef& r) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& tpl : templates) best = std::min(best, cosine_distance(embs[slot.at(r)], tpl.embedding));
      return best;
    };
    for (const auto& r : t.genuine_refs) t.genuine.push_back(dist(r));
    for (const auto& r : t.impostor_refs) t.impostor.push_back(dist(r));
  }
  return out;
}

Counts confusion_at(const UserTrials& trials, double theta) {
  Counts c;
  for (double d : trials.genuine) (d <= theta ? c.tp : c.fn)++;
  for (double d : trials.impostor) (d <= theta ? c.fp : c.tn)++;
  return c;
}

double f1_at_threshold(const UserTrials& trials, double theta) {
  const Counts c = confusion_at(trials, theta);
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

std::vector<double> threshold_grid(double step, double max) {
  require(step > 0.0 && max >= 0.0, "threshold grid needs step > 0 and max >= 0");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor(max / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

std::vector<double> default_grid(const TrialSet& trials, const EvalConfig& cfg) {
  const double max = trials.max_distance() > cfg.grid_max ? 2.0 : cfg.grid_max;
  return threshold_grid(cfg.grid_step, max);
}

SweepResult sweep_thresholds(const TrialSet& trials, std::span<const double> grid) {
  require(!grid.empty(), "threshold grid is empty");
  require(!trials.users.empty(), "no users in trial set");
  SweepResult r;
  r.mean_f1_curve.assign(grid.size(), 0.0);
  std::vector<std::vector<double>> per(trials.users.size(), std::vector<double>(grid.size()));
  for (std::size_t u = 0; u < trials.users.size(); ++u) {
    for (std::size_t i = 0; i < grid.size(); ++i) per[u][i] = f1_at_threshold(trials.users[u], grid[i]);
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double sum = 0.0;
    for (std::size_t u = 0; u < per.size(); ++u) sum += per[u][i];
    r.mean_f1_curve[i] = sum / static_cast<double>(per.size());
    if (r.mean_f1_curve[i] > r.mean_f1_curve[best]) best = i;
  }
  r.best_theta = grid[best];
  r.mean_f1 = r.mean_f1_curve[best];
  for (const auto& row : per) r.per_user_f1.push_back(row[best]);
  return r;
}

ErrorRates far_frr_eer(const TrialSet& trials, std::span<const double> grid) {
  require(!grid.empty(), "threshold grid is empty");
  require(!trials.users.empty(), "no users in trial set");
  ErrorRates r;
  r.far.assign(grid.size(), 0.0);
  r.frr.assign(grid.size(), 0.0);
  std::vector<double> far;
  std::vector<double> frr;
  for (const auto& u : trials.users) {
    require(!u.genuine.empty() && !u.impostor.empty(),
            "user " + u.user_id + " needs both genuine and impostor trials");
    user_rates(u, grid, far, frr);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      r.far[i] += far[i];
      r.frr[i] += frr[i];
    }
  }
  const auto n = static_cast<double>(trials.users.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    r.far[i] /= n;
    r.frr[i] /= n;
  }

  // FAR - FRR is nondecreasing in the threshold; find where it reaches zero.
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double di = r.far[i] - r.frr[i];
    if (di < 0.0) continue;
    if (di == 0.0) {
      r.eer = r.far[i];
      r.eer_theta = grid[i];
      return r;
    }
    if (i == 0) break;
    const double dp = r.far[i - 1] - r.frr[i - 1];
    const double t = -dp / (di - dp);
    r.eer_theta = grid[i - 1] + t * (grid[i] - grid[i - 1]);
    r.eer = r.far[i - 1] + t * (r.far[i] - r.far[i - 1]);
    return r;
  }
  r.crossed = false;
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::abs(r.far[i] - r.frr[i]) < std::abs(r.far[best] - r.frr[best])) best = i;
  }
  r.eer = 0.5 * (r.far[best] + r.frr[best]);
  r.eer_theta = grid[best];
  return r;
}

std::vector<FoldSpec> kfold_splits(std::span<const std::string> user_ids, std::uint64_t seed,
                                   std::size_t n_folds, std::size_t fold_size) {
  require(n_folds >= 3, "k-fold protocol needs at least 3 folds");
  require(fold_size >= 1, "fold_size must be at least 1");
  const std::size_t needed = n_folds * fold_size + 2;
  if (user_ids.size() < needed) {
    fail(ErrorKind::kInvalidArgument, "k-fold protocol needs at least " + std::to_string(needed) +
                                          " users, got " + std::to_string(user_ids.size()));
  }
  std::vector<std::string> shuffled(user_ids.begin(), user_ids.end());
  {
    std::vector<std::string> uniq = shuffled;
    std::sort(uniq.begin(), uniq.end());
    require(std::adjacent_find(uniq.begin(), uniq.end()) == uniq.end(), "duplicate user ids");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(shuffled));
  std::vector<std::vector<std::string>> folds(n_folds);
  for (std::size_t k = 0; k < n_folds; ++k) {
    folds[k].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(k * fold_size),
                    shuffled.begin() + static_cast<std::ptrdiff_t>((k + 1) * fold_size));
  }
  const std::vector<std::string> unassigned(shuffled.begin() + static_cast<std::ptrdiff_t>(n_folds * fold_size),
                                            shuffled.end());
  std::vector<FoldSpec> out;
  for (std::size_t k = 0; k < n_folds; ++k) {
    FoldSpec f;
    f.folds = folds;
    f.test_fold = k;
    f.val_fold = (k + n_folds - 1) % n_folds;
    f.val_wrapped = k == 0;
    f.test = folds[k];
    f.val = folds[f.val_fold];
    for (std::size_t j = 0; j < n_folds; ++j) {
      if (j != k && j != f.val_fold) f.train.insert(f.train.end(), folds[j].begin(), folds[j].end());
    }
    // users outside the folds are never tested or validated on, only trained on
    f.train.insert(f.train.end(), unassigned.begin(), unassigned.end());
    f.unassigned = unassigned;
    out.push_back(std::move(f));
  }
  return out;
}

FoldSpec holdout_split(std::span<const std::string> user_ids, std::uint64_t seed,
                       std::size_t val_count, std::size_t test_count) {
  require(val_count >= 1 && test_count >= 1, "holdout split needs validation and test users");
  if (user_ids.size() < val_count + test_count + 1) {
    fail(ErrorKind::kInvalidArgument, "holdout split needs at least " +
                                          std::to_string(val_count + test_count + 1) + " users, got " +
                                          std::to_string(user_ids.size()));
  }
  std::vector<std::string> shuffled(user_ids.begin(), user_ids.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(shuffled));
  FoldSpec f;
  auto it = shuffled.begin();
  f.test.assign(it, it + static_cast<std::ptrdiff_t>(test_count));
  it += static_cast<std::ptrdiff_t>(test_count);
  f.val.assign(it, it + static_cast<std::ptrdiff_t>(val_count));
  it += static_cast<std::ptrdiff_t>(val_count);
  f.train.assign(it, shuffled.end());
  f.folds = {f.test, f.val};
  f.test_fold = 0;
  f.val_fold = 1;
  return f;
}

nlohmann::ordered_json fold_to_json(const FoldSpec& f) {
  return {{"test_fold", f.test_fold}, {"val_fold", f.val_fold}, {"val_wrapped", f.val_wrapped},
          {"train", f.train},         {"val", f.val},           {"test", f.test},
          {"unassigned", f.unassigned},   {"folds", f.folds}};
}

FoldSpec fold_from_json(const nlohmann::json& j) {
  FoldSpec f;
  try {
    f.test_fold = j.at("test_fold").get<std::size_t>();
    f.val_fold = j.at("val_fold").get<std::size_t>();
    f.val_wrapped = j.value("val_wrapped", false);
    f.train = j.at("train").get<std::vector<std::string>>();
    f.val = j.at("val").get<std::vector<std::string>>();
    f.test = j.at("test").get<std::vector<std::string>>();
    f.unassigned = j.value("unassigned", std::vector<std::string>{});
    f.folds = j.value("folds", std::vector<std::vector<std::string>>{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("fold spec: ") + e.what());
  }
  return f;
}

EvalReport make_report(const TrialSet& trials, const EvalConfig& cfg) {
  EvalReport rep;
  rep.config = cfg;
  rep.grid = default_grid(trials, cfg);
  const auto sweep = sweep_thresholds(trials, rep.grid);
  const auto rates = far_frr_eer(trials, rep.grid);
  rep.mean_f1 = sweep.mean_f1;
  rep.best_theta = sweep.best_theta;
  rep.eer = rates.eer;
  rep.eer_theta = rates.eer_theta;
  rep.eer_crossed = rates.crossed;
  rep.far_curve = rates.far;
  rep.frr_curve = rates.frr;
  for (std::size_t u = 0; u < trials.users.size(); ++u) {
    const auto& t = trials.users[u];
    rep.per_user.push_back({t.user_id, sweep.per_user_f1[u], t.genuine.size(), t.impostor.size(),
                            t.enrollment.size(), t.appearances.size()});
  }
  return rep;
}

EvalReport evaluate(const Model& model, const StftConfig& stft,
                    std::span<const UserSessions> users, const EvalConfig& cfg) {
  return make_report(build_trials(model, stft, users, cfg), cfg);
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json per_user = nlohmann::ordered_json::array();
  for (const auto& u : r.per_user) {
    per_user.push_back({{"user_id", u.user_id},
                        {"f1", u.f1},
                        {"genuine_trials", u.genuine_trials},
                        {"impostor_trials", u.impostor_trials},
                        {"enrollment_windows", u.enrollment_windows},
                        {"templates", u.templates}});
  }
  const auto& c = r.config;
  return {{"mean_f1", r.mean_f1},
          {"best_theta", r.best_theta},
          {"eer", r.eer},
          {"eer_theta", r.eer_theta},
          {"eer_crossed", r.eer_crossed},
          {"per_user", per_user},
          {"thresholds", r.grid},
          {"far_curve", r.far_curve},
          {"frr_curve", r.frr_curve},
          {"config",
           {{"enroll_windows", c.enroll_windows},
            {"enroll_overlap", c.enroll_overlap},
            {"genuine_trials", c.genuine_trials},
            {"impostor_per_user", c.impostor_per_user},
            {"grid_step", c.grid_step},
            {"grid_max", c.grid_max},
            {"window_sec", c.window_sec},
            {"rng_seed", c.rng_seed}}}};
}

void export_embeddings(const Model& model, const StftConfig& stft,
                       std::span<const Session> sessions, double window_sec,
                       double overlap_frac, const std::filesystem::path& path,
                       std::size_t threads) {
  struct Job {
    std::size_t session;
    std::size_t index;
    MagnitudeSeries window;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    auto windows = slice_windows(magnitude(sessions[s].series), window_sec, overlap_frac);
    for (std::size_t i = 0; i < windows.size(); ++i) jobs.push_back({s, i, std::move(windows[i])});
  }
  std::vector<Embedding> embs(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    embs[i] = forward(model, window_spectrogram(jobs[i].window.values, stft));
  });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << "user_id,session_id,window_index";
  for (std::size_t d = 0; d < model.config.embedding_dim; ++d) out << ",e" << d;
  out << '\n';
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& meta = sessions[jobs[i].session].meta;
    out << meta.user_id << ',' << meta.session_id << ',' << jobs[i].index;
    for (float v : embs[i].values) out << ',' << format_double(static_cast<double>(v));
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace gaitgate
