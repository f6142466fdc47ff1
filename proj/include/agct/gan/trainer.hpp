#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "agct/adam.hpp"
#include "agct/autograd.hpp"
#include "agct/gan/attention.hpp"
#include "agct/gan/losses.hpp"
#include "agct/gan/models.hpp"

namespace agct::gan {

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 2e-4;
  std::size_t batch_size = 1;
  double lambda = 10.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0 disables intermediate checkpoints
  ModelKind kind = ModelKind::attention_gan;

  void validate() const {
    if (epochs < 1) fail(ErrorKind::invalid_argument, "epochs must be >= 1");
    if (!(lambda >= 0)) fail(ErrorKind::invalid_argument, "lambda must be >= 0");
    if (!(learning_rate > 0)) fail(ErrorKind::invalid_argument, "learning rate must be > 0");
    if (batch_size != 1) fail(ErrorKind::invalid_argument, "only batch size 1 is supported");
  }

  AdamHyper adam() const {
    AdamHyper h;
    h.learning_rate = learning_rate;
    return h;
  }
};

struct StepLosses {
  std::optional<double> loss_d;  // absent for the cnn kind
  std::optional<double> adv;
  double l1 = 0;
  double total = 0;  // L_F
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  std::optional<double> loss_d;
  std::optional<double> adv;
  double loss_f = 0;
  double l1 = 0;
  double seconds = 0;
  std::size_t steps = 0;
};

using TrainHistory = std::vector<EpochStats>;

template <class T>
class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& cfg)
      : Trainer(build_models<T>(checked(model_cfg, cfg), cfg.seed), cfg) {}

  Trainer(Models<T> models, const TrainConfig& cfg) : models_(std::move(models)), cfg_(cfg) {
    cfg_.validate();
    if (models_.config.kind != cfg_.kind)
      fail(ErrorKind::invalid_argument, "train config kind " + std::string(to_string(cfg_.kind)) +
                                            " does not match model kind " +
                                            std::string(to_string(models_.config.kind)));
    g_state_.hyper = cfg_.adam();
    d_state_.hyper = cfg_.adam();
  }

  Models<T>& models() { return models_; }
  const Models<T>& models() const { return models_; }
  const TrainConfig& config() const { return cfg_; }
  AdamState<T>& generator_optimizer() { return g_state_; }
  AdamState<T>& discriminator_optimizer() { return d_state_; }
  const AdamState<T>& generator_optimizer() const { return g_state_; }
  const AdamState<T>& discriminator_optimizer() const { return d_state_; }
  std::size_t epochs_completed() const { return epochs_completed_; }
  void set_epochs_completed(std::size_t e) { epochs_completed_ = e; }

  /// One alternating update: D on the detached synthetic image, then G.
  StepLosses train_step(const Tensor<T>& mr, const Tensor<T>& ct) {
    models_.set_training(true);
    StepLosses out;
    GenerateResult<T> gen = generate(models_, mr);

    if (models_.discriminator) {
      Discriminator<T>& d = *models_.discriminator;
      const Tensor<T> ld = loss_d(d, ct, gen.synct.detach());
      out.loss_d = static_cast<double>(ld.item());
      const Gradients<T> grads = backward(ld);
      auto params = d.parameters();
      adam_step(params, grads, d_state_);
    }

    auto g_params = models_.generator.parameters();
    if (models_.discriminator) {
      Discriminator<T>& d = *models_.discriminator;
      d.set_requires_grad(false);
      GeneratorLoss<T> lg = loss_g(d, gen.synct, ct, cfg_.lambda);
      out.adv = static_cast<double>(lg.adv.item());
      out.l1 = static_cast<double>(lg.l1.item());
      out.total = static_cast<double>(lg.total.item());
      // D stays frozen through backward so no gradient is accumulated for it
      const Gradients<T> grads = backward(lg.total);
      d.set_requires_grad(true);
      adam_step(g_params, grads, g_state_);
    } else {
      const Tensor<T> l1 = l1_loss(ct, gen.synct);
      out.l1 = out.total = static_cast<double>(l1.item());
      const Gradients<T> grads = backward(l1);
      adam_step(g_params, grads, g_state_);
    }
    return out;
  }

 private:
  static const ModelConfig& checked(const ModelConfig& m, const TrainConfig& c) {
    if (m.kind != c.kind)
      fail(ErrorKind::invalid_argument, "train config kind does not match model kind");
    return m;
  }

  Models<T> models_;
  TrainConfig cfg_;
  AdamState<T> g_state_;
  AdamState<T> d_state_;
  std::size_t epochs_completed_ = 0;
};

/// Shuffle stream for epoch ordering, separate from parameter initialization.
inline std::mt19937_64 shuffle_rng(std::uint64_t seed) {
  return std::mt19937_64(seed ^ 0x9e3779b97f4a7c15ull);
}

/// Runs the remaining epochs over `pairs` (each element exposes `.mr` and
/// `.ct` tensors). `on_epoch` runs after every epoch, e.g. to checkpoint.
template <class T, class Pairs>
TrainHistory train(Trainer<T>& trainer, const Pairs& pairs,
                   const std::function<void(const EpochStats&, Trainer<T>&)>& on_epoch = {}) {
  const std::size_t n = std::size(pairs);
  if (n == 0) fail(ErrorKind::empty_input, "training dataset is empty");
  std::vector<std::size_t> order(n);
  auto rng = shuffle_rng(trainer.config().seed);
  // Replay the shuffles of already completed epochs so a resumed run follows
  // the same ordering as an uninterrupted one.
  for (std::size_t e = 0; e < trainer.epochs_completed(); ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  TrainHistory history;
  const bool adversarial = trainer.models().discriminator.has_value();
  while (trainer.epochs_completed() < trainer.config().epochs) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum_d = 0, sum_adv = 0, sum_f = 0, sum_l1 = 0;
    for (std::size_t idx : order) {
      const auto& pair = pairs[idx];
      const StepLosses s = trainer.train_step(pair.mr, pair.ct);
      if (s.loss_d) sum_d += *s.loss_d;
      if (s.adv) sum_adv += *s.adv;
      sum_f += s.total;
      sum_l1 += s.l1;
    }
    trainer.set_epochs_completed(trainer.epochs_completed() + 1);
    EpochStats st;
    st.epoch = trainer.epochs_completed();
    st.steps = n;
    const double dn = static_cast<double>(n);
    if (adversarial) {
      st.loss_d = sum_d / dn;
      st.adv = sum_adv / dn;
    }
    st.loss_f = sum_f / dn;
    st.l1 = sum_l1 / dn;
    st.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.push_back(st);
    if (on_epoch) on_epoch(st, trainer);
  }
  trainer.models().set_training(false);
  return history;
}

}  // namespace agct::gan
