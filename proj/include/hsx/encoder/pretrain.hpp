#pragma once

// Masked spectral reconstruction pretraining.

#include <sstream>

#include "hsx/encoder/checkpoint.hpp"

namespace hsx {

struct PretrainConfig {
  EncoderConfig encoder;
  double mask_ratio = 0.95;
  std::size_t steps = 500;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::uint64_t seed = 42;
  std::size_t eval_pixels = 256;
};

struct PretrainResult {
  EncoderCheckpoint checkpoint;
  std::vector<double> loss_history;  // training loss per step
  double initial_eval_mse = 0;       // held-out masked-band MSE before training
  double final_eval_mse = 0;         // ... and after
  double mean_baseline_mse = 0;      // MSE of predicting the mean masked value
};

namespace detail {

// A batch of pixels from one cube with their masked positions.
struct MaskedBatch {
  const HyperCube* cube = nullptr;
  std::vector<float> values;       // B*C
  std::vector<bool> mask;          // B*C
  std::vector<std::size_t> rows;   // flattened masked positions
  std::vector<float> targets;      // values at `rows`
  std::size_t count = 0;
};

inline MaskedBatch draw_masked_batch(const HyperCube& cube, std::size_t count, double ratio, CounterRng& rng) {
  MaskedBatch b;
  b.cube = &cube;
  b.count = count;
  const std::size_t C = cube.bands();
  b.values.reserve(count * C);
  b.mask.assign(count * C, false);
  for (std::size_t i = 0; i < count; ++i) {
    const auto px = cube.pixel(rng.below(cube.pixels()));
    b.values.insert(b.values.end(), px.begin(), px.end());
    for (auto c : choose_mask(C, ratio, rng)) {
      b.mask[i * C + c] = true;
      b.rows.push_back(i * C + c);
      b.targets.push_back(px[c]);
    }
  }
  return b;
}

template <class T>
tensor::Tensor<T> masked_loss(const Encoder<T>& enc, const MaskedBatch& b) {
  const std::size_t C = b.cube->bands();
  tensor::Tensor<T> values({b.count, C}, std::vector<T>(b.values.begin(), b.values.end()));
  auto e = enc.encode(values, b.cube->grid, b.mask);
  auto pred = enc.reconstruct(e.tokens, b.rows);
  tensor::Tensor<T> target({b.targets.size()}, std::vector<T>(b.targets.begin(), b.targets.end()));
  return tensor::mse(pred, target);
}

}  // namespace detail

/// Masked-band MSE of `enc` over a set of batches, weighted by masked count.
template <class T>
double masked_mse(const Encoder<T>& enc, const std::vector<detail::MaskedBatch>& batches) {
  double se = 0;
  std::size_t n = 0;
  for (const auto& b : batches) {
    se += static_cast<double>(detail::masked_loss(enc, b).item()) * static_cast<double>(b.targets.size());
    n += b.targets.size();
  }
  return n ? se / static_cast<double>(n) : 0.0;
}

/// Trains a fresh encoder on unlabeled source cubes (grids may differ between
/// cubes) by reconstructing masked bands. Deterministic for a given config.
inline PretrainResult pretrain(const std::vector<HyperCube>& source, const PretrainConfig& cfg) {
  if (source.empty()) throw Error(ErrorKind::Data, "pretraining needs at least one source cube");
  MaskSpec{cfg.mask_ratio}.validate();
  for (const auto& c : source) c.validate();

  Encoder<float> enc(cfg.encoder, cfg.seed);

  // Held-out evaluation batches: fixed pixels and masks, one batch per cube.
  std::vector<detail::MaskedBatch> eval;
  {
    CounterRng rng(cfg.seed, stream("pretrain.eval"));
    const std::size_t per = std::max<std::size_t>(1, cfg.eval_pixels / source.size());
    for (const auto& c : source) eval.push_back(detail::draw_masked_batch(c, per, cfg.mask_ratio, rng));
  }
  PretrainResult res;
  {
    double sum = 0, sq = 0;
    std::size_t n = 0;
    for (const auto& b : eval)
      for (float t : b.targets) {
        sum += t;
        ++n;
      }
    const double mu = n ? sum / static_cast<double>(n) : 0.0;
    for (const auto& b : eval)
      for (float t : b.targets) sq += (t - mu) * (t - mu);
    res.mean_baseline_mse = n ? sq / static_cast<double>(n) : 0.0;
  }
  enc.set_trainable(false);
  res.initial_eval_mse = masked_mse(enc, eval);
  enc.set_trainable(true);

  tensor::Adam<float> opt(enc.params());
  const StreamId train_stream = stream("pretrain.batches");
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    CounterRng rng(cfg.seed, train_stream.child(step));
    const auto& cube = source[rng.below(source.size())];
    auto batch = detail::draw_masked_batch(cube, cfg.batch, cfg.mask_ratio, rng);
    opt.zero_grad();
    auto loss = detail::masked_loss(enc, batch);
    const double l = loss.item();
    if (!std::isfinite(l))
      throw TrainingError("pretraining loss diverged at step " + std::to_string(step),
                          static_cast<long>(step) - 1);
    res.loss_history.push_back(l);
    tensor::backward(loss);
    opt.step(cfg.lr);
  }

  enc.set_trainable(false);
  res.final_eval_mse = masked_mse(enc, eval);
  res.checkpoint = EncoderCheckpoint::from(enc);
  return res;
}

inline std::string loss_history_csv(const std::vector<double>& history) {
  std::ostringstream os;
  os.precision(9);
  os << "step,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) os << i << ',' << history[i] << '\n';
  return os.str();
}

}  // namespace hsx
