#include "gaitgate/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "gaitgate/error.hpp"
#include "gaitgate/parallel.hpp"

namespace gaitgate {

namespace {

std::size_t window_samples(double window_sec, double fs) {
  return static_cast<std::size_t>(std::llround(window_sec * fs));
}

// Uniform ordered pair of window starts (a, b) in [0, n - len] with
// |a - b| >= len. Requires n >= 2 len.
std::pair<std::size_t, std::size_t> draw_disjoint_pair(std::size_t n, std::size_t len, Rng& rng) {
  const std::size_t k = n - 2 * len + 1;  // choices of a for the earlier window
  // Earlier start a admits (k - a) later starts; C(a) counts pairs before a.
  const std::uint64_t total = static_cast<std::uint64_t>(k) * (k + 1) / 2;
  const std::uint64_t r = rng.below(total);
  auto before = [k](std::uint64_t a) { return a * k - a * (a - 1) / 2; };
  std::uint64_t lo = 0;
  std::uint64_t hi = k;  // answer in [lo, hi)
  while (hi - lo > 1) {
    const std::uint64_t mid = (lo + hi) / 2;
    if (before(mid) <= r) lo = mid; else hi = mid;
  }
  const std::size_t a = static_cast<std::size_t>(lo);
  const std::size_t b = a + len + static_cast<std::size_t>(r - before(lo));
  if (rng.below(2) == 1) return {b, a};
  return {a, b};
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(static_cast<double>(x)); });
}

}  // namespace

std::size_t eligible_user_count(std::span<const UserSessions> users, double window_sec) {
  std::size_t n = 0;
  for (const auto& u : users) {
    n += std::any_of(u.sessions.begin(), u.sessions.end(), [&](const MagnitudeSeries& s) {
      return s.size() >= 2 * window_samples(window_sec, s.fs);
    });
  }
  return n;
}

void TrainConfig::validate() const {
  require(temperature > 0.0, "temperature must be positive");
  require(pairs_per_batch >= 2, "a batch needs at least 2 pairs (one negative)");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "Adam eps must be positive");
  require(epochs >= 1 && batches_per_epoch >= 1, "epochs and batches_per_epoch must be positive");
  require(dropout_p >= 0.0 && dropout_p <= 1.0, "dropout_p must be in [0, 1]");
  require(window_sec > 0.0, "window_sec must be positive");
}

ContrastiveBatch sample_batch(std::span<const UserSessions> users, const TrainConfig& cfg,
                              const StftConfig& stft, Rng& rng) {
  const std::size_t n_pairs = cfg.pairs_per_batch;
  require(n_pairs >= 2, "a batch needs at least 2 pairs (one negative)");
  std::vector<std::size_t> eligible_users;
  std::vector<std::vector<std::size_t>> eligible_sessions(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (std::size_t s = 0; s < users[u].sessions.size(); ++s) {
      const auto& sess = users[u].sessions[s];
      if (sess.size() >= 2 * window_samples(cfg.window_sec, sess.fs)) eligible_sessions[u].push_back(s);
    }
    if (!eligible_sessions[u].empty()) eligible_users.push_back(u);
  }
  if (eligible_users.size() < n_pairs) {
    fail(ErrorKind::kInvalidArgument,
         "batch of " + std::to_string(n_pairs) + " pairs needs that many users with a session of at least " +
             std::to_string(2 * cfg.window_sec) + " s; found " + std::to_string(eligible_users.size()));
  }

  ContrastiveBatch batch;
  batch.specs.reserve(2 * n_pairs);
  for (std::size_t pick : rng.sample_without_replacement(eligible_users.size(), n_pairs)) {
    const std::size_t u = eligible_users[pick];
    const auto& sessions = eligible_sessions[u];
    const std::size_t s = sessions[rng.below(sessions.size())];
    const auto& series = users[u].sessions[s];
    const std::size_t len = window_samples(cfg.window_sec, series.fs);
    const auto [a, b] = draw_disjoint_pair(series.size(), len, rng);
    for (std::size_t start : {a, b}) {
      const std::span<const double> window(series.values.data() + start, len);
      const AugmentConfig aug{cfg.dropout_p, rng.next_u64()};
      batch.specs.push_back(pixel_dropout(window_spectrogram(window, stft), aug));
      batch.sources.push_back({u, s, start, len});
    }
  }
  batch.partner.resize(batch.specs.size());
  for (std::size_t i = 0; i < batch.partner.size(); ++i) batch.partner[i] = i ^ 1U;
  return batch;
}

template <typename T>
double nt_xent_loss(std::span<const std::vector<T>> z, std::span<const std::size_t> partner,
                    double temperature, std::vector<std::vector<T>>* grad) {
  require(temperature > 0.0, "temperature must be positive");
  const std::size_t m = z.size();
  require(m % 2 == 0 && m / 2 >= 2, "NT-Xent needs at least 2 positive pairs");
  require(partner.size() == m, "pairing map size does not match the batch");
  for (std::size_t i = 0; i < m; ++i) {
    require(partner[i] < m && partner[i] != i && partner[partner[i]] == i,
            "pairing map is not a perfect matching");
  }
  const std::size_t dim = z.front().size();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    require(z[i].size() == dim, "embeddings of mixed dimension");
    double sq = 0.0;
    for (T v : z[i]) sq += static_cast<double>(v) * static_cast<double>(v);
    norms[i] = std::sqrt(sq);
    if (!(norms[i] > 0.0)) fail(ErrorKind::kNumeric, "cosine similarity of a zero embedding");
  }
  std::vector<double> sim(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = i + 1; k < m; ++k) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(z[i][d]) * static_cast<double>(z[k][d]);
      sim[i * m + k] = sim[k * m + i] = dot / (norms[i] * norms[k]);
    }
  }

  const double inv_tau = 1.0 / temperature;
  double loss = 0.0;
  // coef[i*m+k] = d(loss)/d(sim_ik) contributed by anchor i
  std::vector<double> coef(grad ? m * m : 0, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (k != i) mx = std::max(mx, sim[i * m + k] * inv_tau);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (k != i) denom += std::exp(sim[i * m + k] * inv_tau - mx);
    }
    const double lse = mx + std::log(denom);
    loss += lse - sim[i * m + partner[i]] * inv_tau;
    if (grad) {
      for (std::size_t k = 0; k < m; ++k) {
        if (k == i) continue;
        const double p = std::exp(sim[i * m + k] * inv_tau - lse);
        coef[i * m + k] = (p - (k == partner[i] ? 1.0 : 0.0)) * inv_tau / static_cast<double>(m);
      }
    }
  }
  loss /= static_cast<double>(m);

  if (grad) {
    std::vector<std::vector<double>> g(m, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        if (k == i) continue;
        const double c = coef[i * m + k];
        if (c == 0.0) continue;
        const double s = sim[i * m + k];
        const double nn = norms[i] * norms[k];
        for (std::size_t d = 0; d < dim; ++d) {
          const double zi = static_cast<double>(z[i][d]);
          const double zk = static_cast<double>(z[k][d]);
          g[i][d] += c * (zk / nn - s * zi / (norms[i] * norms[i]));
          g[k][d] += c * (zi / nn - s * zk / (norms[k] * norms[k]));
        }
      }
    }
    grad->assign(m, std::vector<T>(dim));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t d = 0; d < dim; ++d) (*grad)[i][d] = static_cast<T>(g[i][d]);
    }
  }
  return loss;
}

template double nt_xent_loss<float>(std::span<const std::vector<float>>, std::span<const std::size_t>,
                                    double, std::vector<std::vector<float>>*);
template double nt_xent_loss<double>(std::span<const std::vector<double>>, std::span<const std::size_t>,
                                     double, std::vector<std::vector<double>>*);

template <typename T>
LossGradients<T> loss_gradients(const EncoderConfig& cfg, const BasicParameterSet<T>& params,
                                const ContrastiveBatch& batch, double temperature,
                                std::size_t threads) {
  const std::size_t m = batch.specs.size();
  std::vector<ForwardCache<T>> caches(m);
  std::vector<std::vector<T>> z(m);
  parallel_for(m, threads, [&](std::size_t i) {
    z[i] = encoder_forward<T>(cfg, params, batch.specs[i], &caches[i]);
  });

  std::vector<std::vector<T>> dz;
  LossGradients<T> out;
  out.loss = nt_xent_loss<T>(z, batch.partner, temperature, &dz);
  if (!std::isfinite(out.loss)) fail(ErrorKind::kNumeric, "non-finite NT-Xent loss");

  std::vector<BasicParameterSet<T>> per_sample(m);
  parallel_for(m, threads, [&](std::size_t i) {
    per_sample[i] = params.zeros_like();
    encoder_backward<T>(cfg, params, caches[i], dz[i], per_sample[i]);
  });
  out.grads = params.zeros_like();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < out.grads.tensors.size(); ++t) {
      auto& dst = out.grads.tensors[t].values;
      const auto& src = per_sample[i].tensors[t].values;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  for (const auto& t : out.grads.tensors) {
    if (!all_finite(t.values)) fail(ErrorKind::kNumeric, "non-finite gradient in tensor " + t.name);
  }
  return out;
}

template LossGradients<float> loss_gradients<float>(const EncoderConfig&, const BasicParameterSet<float>&,
                                                    const ContrastiveBatch&, double, std::size_t);
template LossGradients<double> loss_gradients<double>(const EncoderConfig&, const BasicParameterSet<double>&,
                                                      const ContrastiveBatch&, double, std::size_t);

AdamState AdamState::for_params(const ParameterSet& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void optimizer_step(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                    const TrainConfig& cfg) {
  require(grads.tensors.size() == params.tensors.size() &&
              state.m.tensors.size() == params.tensors.size() &&
              state.v.tensors.size() == params.tensors.size(),
          "optimizer: tensor count mismatch");
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    require(grads.tensors[t].shape == params.tensors[t].shape &&
                state.m.tensors[t].shape == params.tensors[t].shape &&
                state.v.tensors[t].shape == params.tensors[t].shape,
            "optimizer: shape mismatch in tensor " + params.tensors[t].name);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& p = params.tensors[t].values;
    const auto& g = grads.tensors[t].values;
    auto& m = state.m.tensors[t].values;
    auto& v = state.v.tensors[t].values;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = cfg.learning_rate * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.adam_eps);
      p[j] = static_cast<float>(p[j] - update);
    }
  }
}

nlohmann::ordered_json epoch_log_to_json(const EpochLog& log) {
  return {{"fold", log.fold},
          {"epoch", log.epoch},
          {"mean_loss", log.mean_loss},
          {"val_f1", log.val_f1},
          {"wall_ms", log.wall_ms}};
}

FitResult fit(std::span<const UserSessions> train_users, const EncoderConfig& encoder,
              const TrainConfig& cfg, const StftConfig& stft, const Validator& validate,
              const EpochCallback& on_epoch) {
  cfg.validate();
  require(!train_users.empty(), "training set is empty");
  require(static_cast<bool>(validate), "fit needs a validator");
  // Pairs are capped by the number of distinct users that can supply one.
  TrainConfig run = cfg;
  run.pairs_per_batch = std::min(cfg.pairs_per_batch, eligible_user_count(train_users, cfg.window_sec));
  require(run.pairs_per_batch >= 2,
          "training needs at least 2 users with two non-overlapping windows in one session");
  Model model{encoder, init_params(encoder)};
  AdamState state = AdamState::for_params(model.params);
  Rng rng(cfg.rng_seed);

  FitResult result;
  result.best = model;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      const auto batch = sample_batch(train_users, run, stft, rng);
      const auto lg = loss_gradients<float>(model.config, model.params, batch, cfg.temperature, cfg.threads);
      loss_sum += lg.loss;
      optimizer_step(model.params, lg.grads, state, cfg);
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(cfg.batches_per_epoch);
    log.val_f1 = validate(model, epoch);
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (log.val_f1 >= best) {
      best = log.val_f1;
      result.best = model;
      result.best_epoch = epoch;
      result.best_val_f1 = log.val_f1;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, model);
  }
  return result;
}

Validator eval_validator(std::vector<UserSessions> val_users, StftConfig stft, EvalConfig cfg) {
  return [users = std::move(val_users), stft, cfg](const Model& model, std::size_t) {
    return evaluate(model, stft, users, cfg).mean_f1;
  };
}

std::vector<UserSessions> select_users(std::span<const UserSessions> users,
                                       std::span<const std::string> ids) {
  std::vector<UserSessions> out;
  for (const auto& id : ids) {
    auto it = std::find_if(users.begin(), users.end(), [&](const auto& u) { return u.user_id == id; });
    require(it != users.end(), "user '" + id + "' is not in the dataset");
    out.push_back(*it);
  }
  return out;
}

FitResult fit_split(std::span<const UserSessions> users, const FoldSpec& split,
                    const EncoderConfig& encoder, const TrainConfig& cfg, const StftConfig& stft,
                    const EvalConfig& eval, const EpochCallback& on_epoch) {
  require(!split.train.empty(), "training set is empty");
  require(!split.val.empty(), "validation set is empty");
  const std::set<std::string> train(split.train.begin(), split.train.end());
  for (const auto& id : split.val) {
    require(!train.contains(id), "user '" + id + "' is in both training and validation sets");
  }
  auto train_users = select_users(users, split.train);
  auto val_users = select_users(users, split.val);
  EvalConfig val_cfg = eval;
  val_cfg.window_sec = cfg.window_sec;
  return fit(train_users, encoder, cfg, stft, eval_validator(std::move(val_users), stft, val_cfg),
             on_epoch);
}

}  // namespace gaitgate
