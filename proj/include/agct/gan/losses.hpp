#pragma once

#include "agct/gan/models.hpp"
#include "agct/ops.hpp"

namespace agct::gan {

// Least-squares objectives on discriminator scores. Scores are [N]; batch
// expectations are means.

template <class T>
Tensor<T> lsgan_discriminator(const Tensor<T>& real_score, const Tensor<T>& fake_score) {
  const Tensor<T> real_term = mean(square(add_scalar(real_score, T(-1))));
  const Tensor<T> fake_term = mean(square(fake_score));
  return scale(add(real_term, fake_term), T(0.5));
}

template <class T>
Tensor<T> lsgan_generator(const Tensor<T>& fake_score) {
  return scale(mean(square(add_scalar(fake_score, T(-1)))), T(0.5));
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& real, const Tensor<T>& synthetic) {
  if (real.shape() != synthetic.shape())
    fail(ErrorKind::shape_mismatch, "l1 loss shapes " + shape_string(real.shape()) + " vs " +
                                        shape_string(synthetic.shape()));
  return mean(abs(sub(real, synthetic)));
}

template <class T>
Tensor<T> loss_d(Discriminator<T>& d, const Tensor<T>& real_ct, const Tensor<T>& synct_detached) {
  if (synct_detached.requires_grad())
    fail(ErrorKind::invalid_argument, "discriminator loss needs a detached synthetic image");
  const Tensor<T> real_score = d.score(real_ct);
  const Tensor<T> fake_score = d.score(synct_detached);
  return lsgan_discriminator(real_score, fake_score);
}

template <class T>
struct GeneratorLoss {
  Tensor<T> total;
  Tensor<T> adv;
  Tensor<T> l1;
};

template <class T>
GeneratorLoss<T> combine_generator_loss(Tensor<T> adv, Tensor<T> l1, double lambda) {
  if (!(lambda >= 0)) fail(ErrorKind::invalid_argument, "lambda must be >= 0");
  Tensor<T> total = add(adv, scale(l1, static_cast<T>(lambda)));
  return {std::move(total), std::move(adv), std::move(l1)};
}

template <class T>
GeneratorLoss<T> loss_g(Discriminator<T>& d, const Tensor<T>& synct, const Tensor<T>& real_ct,
                        double lambda) {
  Tensor<T> adv = lsgan_generator(d.score(synct));
  return combine_generator_loss(std::move(adv), l1_loss(real_ct, synct), lambda);
}

}  // namespace agct::gan
