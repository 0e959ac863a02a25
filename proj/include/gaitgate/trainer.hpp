#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gaitgate/encoder.hpp"
#include "gaitgate/eval.hpp"
#include "gaitgate/rng.hpp"
#include "gaitgate/signal.hpp"

namespace gaitgate {

struct TrainConfig {
  double temperature = 0.1;
  std::size_t pairs_per_batch = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 50;
  std::size_t batches_per_epoch = 100;
  double dropout_p = 0.1;
  double window_sec = 10.0;
  std::uint64_t rng_seed = 42;
  std::size_t threads = 1;

  void validate() const;
};

struct BatchSource {
  std::size_t user = 0;
  std::size_t session = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

// 2N samples laid out as [a0, b0, a1, b1, ...]; partner[i] is i's positive.
struct ContrastiveBatch {
  std::vector<Spectrogram> specs;
  std::vector<std::size_t> partner;
  std::vector<BatchSource> sources;

  std::size_t pairs() const { return specs.size() / 2; }
};

// N distinct users, one session each, two non-overlapping windows per session
// (uniform over ordered pairs), pixel dropout applied to each window.
ContrastiveBatch sample_batch(std::span<const UserSessions> users, const TrainConfig& cfg,
                              const StftConfig& stft, Rng& rng);

// Users having a session with room for two non-overlapping windows.
std::size_t eligible_user_count(std::span<const UserSessions> users, double window_sec);

// Mean over all 2N anchors of
//   -log( exp(sim(z_i, z_p(i)) / tau) / sum_{k != i} exp(sim(z_i, z_k) / tau) ).
// When `grad` is non-null it receives d(loss)/d(z_i) for every sample.
template <typename T>
double nt_xent_loss(std::span<const std::vector<T>> embeddings,
                    std::span<const std::size_t> partner, double temperature,
                    std::vector<std::vector<T>>* grad = nullptr);

template <typename T>
struct LossGradients {
  double loss = 0.0;
  BasicParameterSet<T> grads;
};

// Exact gradient of nt_xent_loss(forward_batch(params, batch)). Per-sample
// work may run in parallel; the reduction is summed in sample order.
template <typename T>
LossGradients<T> loss_gradients(const EncoderConfig& cfg, const BasicParameterSet<T>& params,
                                const ContrastiveBatch& batch, double temperature,
                                std::size_t threads = 1);

struct AdamState {
  ParameterSet m;
  ParameterSet v;
  std::uint64_t step = 0;

  static AdamState for_params(const ParameterSet& params);
};

void optimizer_step(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                    const TrainConfig& cfg);

struct EpochLog {
  std::size_t fold = 0;
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_f1 = 0.0;
  double wall_ms = 0.0;
};
nlohmann::ordered_json epoch_log_to_json(const EpochLog& log);

struct FitResult {
  Model best;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  std::vector<EpochLog> log;
};

using Validator = std::function<double(const Model&, std::size_t epoch)>;
using EpochCallback = std::function<void(const EpochLog&, const Model&)>;

// Trains from init_params(encoder), validating after every epoch and keeping
// the parameters with the highest validation score (latest epoch on ties).
// Batches use min(pairs_per_batch, eligible users) pairs.
FitResult fit(std::span<const UserSessions> train_users, const EncoderConfig& encoder,
              const TrainConfig& cfg, const StftConfig& stft, const Validator& validate,
              const EpochCallback& on_epoch = {});

// Mean per-user F1 at the best threshold of the evaluation protocol.
Validator eval_validator(std::vector<UserSessions> val_users, StftConfig stft, EvalConfig cfg);

// Resolves a FoldSpec against the loaded users and runs fit with an
// eval_validator on the validation users. Train and validation must be
// non-empty and disjoint.
FitResult fit_split(std::span<const UserSessions> users, const FoldSpec& split,
                    const EncoderConfig& encoder, const TrainConfig& cfg, const StftConfig& stft,
                    const EvalConfig& eval, const EpochCallback& on_epoch = {});

std::vector<UserSessions> select_users(std::span<const UserSessions> users,
                                       std::span<const std::string> ids);

}  // namespace gaitgate
