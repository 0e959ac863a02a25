#include "gaitgate/identity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gaitgate/error.hpp"

namespace gaitgate {

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  require(u.size() == v.size(), "cosine similarity of vectors with different dimensions");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) fail(ErrorKind::kNumeric, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  return 1.0 - cosine_similarity(a, b);
}

Embedding normalized(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::kNumeric, "cannot normalize a zero vector");
  Embedding e;
  e.values.reserve(v.size());
  for (double x : v) e.values.push_back(static_cast<float>(x / n));
  return e;
}

Template* IdentityRecord::find(std::string_view appearance_id) {
  for (auto& t : templates) {
    if (t.appearance_id == appearance_id) return &t;
  }
  return nullptr;
}

bool IdentityStore::contains(std::string_view user_id) const {
  return records_.find(user_id) != records_.end();
}

const IdentityRecord& IdentityStore::record(std::string_view user_id) const {
  auto it = records_.find(user_id);
  if (it == records_.end()) fail(ErrorKind::kUnknownIdentity, "unknown user '" + std::string(user_id) + "'");
  return it->second;
}

IdentityRecord& IdentityStore::record(std::string_view user_id) {
  auto it = records_.find(user_id);
  if (it == records_.end()) fail(ErrorKind::kUnknownIdentity, "unknown user '" + std::string(user_id) + "'");
  return it->second;
}

const Template& IdentityStore::put(const std::string& user_id, Template tpl) {
  require(!user_id.empty(), "user id must not be empty");
  require(!tpl.appearance_id.empty(), "appearance id must not be empty");
  require(tpl.sample_count >= 1, "template sample_count must be at least 1");
  auto& rec = records_[user_id];
  rec.user_id = user_id;
  if (auto* existing = rec.find(tpl.appearance_id)) {
    *existing = std::move(tpl);
    return *existing;
  }
  rec.templates.push_back(std::move(tpl));
  return rec.templates.back();
}

std::string IdentityStore::to_json() const {
  nlohmann::ordered_json users = nlohmann::ordered_json::array();
  for (const auto& [id, rec] : records_) {
    nlohmann::ordered_json tpls = nlohmann::ordered_json::array();
    for (const auto& t : rec.templates) {
      tpls.push_back({{"appearance_id", t.appearance_id},
                      {"embedding", t.embedding.values},
                      {"sample_count", t.sample_count},
                      {"created_at", t.created_at},
                      {"raw_mean", t.raw_mean}});
    }
    users.push_back({{"user_id", id}, {"templates", std::move(tpls)}});
  }
  nlohmann::ordered_json root{{"version", kVersion}, {"users", std::move(users)}};
  return root.dump(2);
}

IdentityStore IdentityStore::from_json(std::string_view text) {
  IdentityStore store;
  try {
    const auto root = nlohmann::json::parse(text);
    const int version = root.at("version").get<int>();
    if (version != kVersion) {
      fail(ErrorKind::kFormat, "unsupported identity store version " + std::to_string(version));
    }
    for (const auto& u : root.at("users")) {
      const auto user_id = u.at("user_id").get<std::string>();
      require(!store.contains(user_id), "duplicate user id in store: " + user_id);
      for (const auto& t : u.at("templates")) {
        Template tpl;
        tpl.appearance_id = t.at("appearance_id").get<std::string>();
        tpl.embedding.values = t.at("embedding").get<std::vector<float>>();
        tpl.sample_count = t.at("sample_count").get<std::size_t>();
        tpl.created_at = t.value("created_at", std::string());
        if (t.contains("raw_mean")) {
          tpl.raw_mean = t.at("raw_mean").get<std::vector<double>>();
        } else {
          tpl.raw_mean.assign(tpl.embedding.values.begin(), tpl.embedding.values.end());
        }
        store.put(user_id, std::move(tpl));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("identity store: ") + e.what());
  }
  return store;
}

void IdentityStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << to_json() << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

IdentityStore IdentityStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Template make_template(std::string appearance_id, std::span<const Embedding> members,
                       std::string created_at) {
  require(!members.empty(), "template needs at least one embedding");
  const std::size_t dim = members.front().dim();
  std::vector<double> mean(dim, 0.0);
  for (const auto& e : members) {
    require(e.dim() == dim, "embeddings of mixed dimension");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += e.values[i];
  }
  for (auto& v : mean) v /= static_cast<double>(members.size());
  Template t;
  t.appearance_id = std::move(appearance_id);
  t.embedding = normalized(mean);
  t.raw_mean = std::move(mean);
  t.sample_count = members.size();
  t.created_at = std::move(created_at);
  return t;
}

const Template& enroll(const Model& model, const StftConfig& stft, const AccelSeries& session,
                       const std::string& user_id, const std::string& appearance_id,
                       double window_sec, IdentityStore& store, std::string created_at) {
  const double provided = session.duration_sec();
  const double required = std::max(kMinEnrollSeconds, window_sec);
  if (provided + 1e-9 < required) {
    std::ostringstream msg;
    msg << "enrollment needs at least " << required << " s of walking, got " << provided << " s";
    fail(ErrorKind::kInvalidArgument, msg.str());
  }
  const auto windows = slice_windows(magnitude(session), window_sec, 0.5);
  require(!windows.empty(), "enrollment session yields no windows");
  std::vector<Embedding> embs;
  embs.reserve(windows.size());
  for (const auto& w : windows) embs.push_back(forward(model, window_spectrogram(w.values, stft)));
  return store.put(user_id, make_template(appearance_id, embs, std::move(created_at)));
}

VerifyResult verify(const IdentityStore& store, std::string_view user_id, const Embedding& probe,
                    double threshold) {
  const auto& rec = store.record(user_id);
  require(!rec.templates.empty(), "user '" + std::string(user_id) + "' has no templates");
  VerifyResult r;
  r.distance = std::numeric_limits<double>::infinity();
  for (const auto& t : rec.templates) {
    const double d = cosine_distance(probe, t.embedding);
    if (d < r.distance) {
      r.distance = d;
      r.matched_appearance = t.appearance_id;
    }
  }
  r.accept = r.distance <= threshold;
  return r;
}

void AdaptiveConfig::validate() const {
  require(verify_threshold > 0.0 && verify_threshold <= trigger_threshold &&
              trigger_threshold < 2.0,
          "adaptive thresholds require 0 < verify <= trigger < 2");
  require(consecutive_windows >= 1, "consecutive_windows must be at least 1");
  require(stability_span >= 1, "stability_span must be at least 1");
}

std::string_view to_string(AdaptiveEventKind kind) {
  switch (kind) {
    case AdaptiveEventKind::kNone: return "none";
    case AdaptiveEventKind::kCounted: return "counted";
    case AdaptiveEventKind::kEnrolled: return "enrolled";
  }
  return "none";
}

AdaptiveEvent adaptive_step(AdaptiveState& state, IdentityStore& store,
                            const std::string& user_id, const Embedding& window, bool in_ear,
                            const AdaptiveConfig& cfg, const std::string& timestamp) {
  cfg.validate();
  AdaptiveEvent ev;
  ev.distance = verify(store, user_id, window, cfg.trigger_threshold).distance;
  auto reset = [&] {
    state.consecutive_above = 0;
    state.buffer.clear();
  };
  if (!in_ear || ev.distance <= cfg.trigger_threshold) {
    reset();
    return ev;
  }
  ++state.consecutive_above;
  state.buffer.push_back(window);
  while (state.buffer.size() > cfg.stability_span) state.buffer.pop_front();
  ev.kind = AdaptiveEventKind::kCounted;
  if (state.consecutive_above < cfg.consecutive_windows) return ev;

  // medoid of the buffer: smallest mean distance to the other members
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.buffer.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < state.buffer.size(); ++j) {
      if (i != j) sum += cosine_distance(state.buffer[i], state.buffer[j]);
    }
    const double score =
        state.buffer.size() > 1 ? sum / static_cast<double>(state.buffer.size() - 1) : 0.0;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }

  auto& rec = store.record(user_id);
  std::size_t counter = state.added.size() + 1;
  std::string id;
  do {
    id = "adaptive-" + timestamp + "-" + std::to_string(counter++);
  } while (rec.find(id) != nullptr);

  const Embedding& chosen = state.buffer[best];
  std::vector<double> raw(chosen.values.begin(), chosen.values.end());
  Template tpl;
  tpl.appearance_id = id;
  tpl.embedding = normalized(raw);
  tpl.raw_mean = std::move(raw);
  tpl.sample_count = 1;
  tpl.created_at = timestamp;
  store.put(user_id, std::move(tpl));
  state.added.push_back(id);
  reset();
  ev.kind = AdaptiveEventKind::kEnrolled;
  ev.appearance_id = id;
  return ev;
}

const Template& refine_template(IdentityStore& store, const std::string& user_id,
                                const std::string& appearance_id, const Embedding& sample,
                                double verify_threshold) {
  auto& rec = store.record(user_id);
  Template* tpl = rec.find(appearance_id);
  require(tpl != nullptr, "user '" + user_id + "' has no appearance '" + appearance_id + "'");
  const double d = cosine_distance(sample, tpl->embedding);
  require(d <= verify_threshold,
          "refusing to refine '" + appearance_id + "' with a rejected sample (distance " +
              std::to_string(d) + " > " + std::to_string(verify_threshold) + ")");
  require(sample.dim() == tpl->raw_mean.size(), "embedding dimension mismatch");
  const auto n = static_cast<double>(tpl->sample_count);
  for (std::size_t i = 0; i < tpl->raw_mean.size(); ++i) {
    tpl->raw_mean[i] = (tpl->raw_mean[i] * n + sample.values[i]) / (n + 1.0);
  }
  tpl->embedding = normalized(tpl->raw_mean);
  ++tpl->sample_count;
  return *tpl;
}

}  // namespace gaitgate
