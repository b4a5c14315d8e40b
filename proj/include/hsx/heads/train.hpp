#pragma once

// Training loops with early stopping on validation mIoU, and the trained-head
// file ("MHED" container).

#include <functional>

#include "hsx/data/manifest.hpp"
#include "hsx/heads/fc.hpp"
#include "hsx/heads/unet.hpp"
#include "hsx/metrics/confusion.hpp"

namespace hsx {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 2;
  std::size_t max_epochs = 40;
  std::size_t patience = 20;
  std::uint64_t seed = 42;
  std::string optimizer = "adam";

  void validate() const {
    if (!(lr > 0)) throw Error(ErrorKind::Config, "learning rate must be positive");
    if (batch == 0) throw Error(ErrorKind::Config, "batch size must be positive");
    if (patience == 0) throw Error(ErrorKind::Config, "patience must be positive");
    if (optimizer != "adam" && optimizer != "sgd") throw Error(ErrorKind::Config, "unknown optimizer '" + optimizer + "'");
  }
};

/// Outcome of one training run. Epoch 0 is the initialisation.
struct TrainResult {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_miou = 0;
  std::vector<double> train_loss;  // mean loss per epoch
  std::vector<double> val_miou;    // per epoch, index 0 = initialisation
};

// ---------------------------------------------------------------- segmentation

/// Input map and labels of one cube, channels-last.
struct SegSample {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<float> input;
  std::vector<std::uint16_t> labels;
};

/// Cubes of one split. `fetch` is called for every cube in every epoch, so a
/// feature-cache backed source sees one lookup per cube per epoch.
struct SegDataset {
  Split split = Split::Train;
  std::size_t count = 0;
  std::function<SegSample(std::size_t)> fetch;
};

namespace detail {

inline void require_split(const SegDataset& d, Split want, const char* role) {
  if (d.split != want)
    throw Error(ErrorKind::Protocol, std::string(role) + " data carries split tag '" + to_string(d.split) + "'");
  if (d.count == 0) throw Error(ErrorKind::Data, std::string("empty ") + role + " split");
}

struct PaddedBatch {
  std::size_t n = 0, Hp = 0, Wp = 0, C = 0;
  std::vector<float> input;
  std::vector<std::uint32_t> targets;
};

inline PaddedBatch pad_batch(const std::vector<SegSample>& samples, std::size_t multiple) {
  PaddedBatch b;
  b.n = samples.size();
  for (const auto& s : samples) {
    std::size_t Hp, Wp;
    auto x = reflect_pad(std::span<const float>(s.input), s.height, s.width, s.channels, multiple, Hp, Wp);
    if (b.input.empty()) {
      b.Hp = Hp;
      b.Wp = Wp;
      b.C = s.channels;
    } else if (Hp != b.Hp || Wp != b.Wp || s.channels != b.C) {
      throw Error(ErrorKind::Shape, "cubes of one batch must share extents");
    }
    b.input.insert(b.input.end(), x.begin(), x.end());
    std::vector<std::uint32_t> t(Hp * Wp, kIgnoreLabel);
    for (std::size_t i = 0; i < s.height; ++i)
      for (std::size_t j = 0; j < s.width; ++j) t[i * Wp + j] = s.labels.empty() ? kIgnoreLabel : s.labels[i * s.width + j];
    b.targets.insert(b.targets.end(), t.begin(), t.end());
  }
  return b;
}

template <class P>
std::vector<std::uint16_t> argmax_rows(std::span<const P> logits, std::size_t K) {
  std::vector<std::uint16_t> out(logits.size() / K);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const P* row = logits.data() + i * K;
    out[i] = static_cast<std::uint16_t>(std::max_element(row, row + K) - row);
  }
  return out;
}

}  // namespace detail

/// Predicted label map (H*W) of one sample in eval mode.
inline std::vector<std::uint16_t> predict_segmentation(UNet<float>& model, const SegSample& s) {
  std::size_t Hp, Wp;
  auto x = reflect_pad(std::span<const float>(s.input), s.height, s.width, s.channels, model.multiple(), Hp, Wp);
  auto logits = model.forward(tensor::Tensor<float>({1, Hp, Wp, s.channels}, std::move(x)), false);
  auto cropped = crop(std::span<const float>(logits.data()), Hp, Wp, model.classes(), s.height, s.width);
  return detail::argmax_rows(std::span<const float>(cropped), model.classes());
}

inline ConfusionMatrix evaluate_segmentation(UNet<float>& model, const SegDataset& data) {
  ConfusionMatrix cm(model.classes());
  for (std::size_t i = 0; i < data.count; ++i) {
    const auto s = data.fetch(i);
    cm.accumulate(predict_segmentation(model, s), s.labels);
  }
  return cm;
}

/// Snapshot of a U-Net's weights and batch-norm statistics.
struct UNetState {
  std::vector<StoredArray> weights, buffers;
};
inline UNetState snapshot(const UNet<float>& m) { return {store_all(m.params()), m.buffers()}; }
inline void restore(UNet<float>& m, const UNetState& s) {
  auto p = m.params();
  restore_all(p, s.weights);
  m.set_buffers(s.buffers);
}

/// Minimises cross-entropy (ignore id 65535) over the train split, evaluates
/// val mIoU after every epoch and returns with the best epoch's weights loaded.
inline TrainResult train_segmentation(UNet<float>& model, const SegDataset& train, const SegDataset& val,
                                      const TrainConfig& tc) {
  tc.validate();
  detail::require_split(train, Split::Train, "training");
  detail::require_split(val, Split::Val, "validation");

  TrainResult res;
  auto score = [&] {
    auto cm = evaluate_segmentation(model, val);
    return cm.total() ? miou(cm) : 0.0;
  };
  res.best_val_miou = score();
  res.val_miou.push_back(res.best_val_miou);
  auto best = snapshot(model);

  tensor::Optimizer<float> opt(tc.optimizer, model.params());
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    CounterRng rng(tc.seed, stream("seg.epoch").child(epoch));
    const auto order = rng.permutation(train.count);
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      std::vector<SegSample> samples;
      for (std::size_t i = start; i < std::min(order.size(), start + tc.batch); ++i)
        samples.push_back(train.fetch(order[i]));
      auto b = detail::pad_batch(samples, model.multiple());
      opt.zero_grad();
      auto logits = model.forward(tensor::Tensor<float>({b.n, b.Hp, b.Wp, b.C}, std::move(b.input)), true,
                                  (epoch << 24) | steps);
      auto flat = tensor::reshape(logits, {b.n * b.Hp * b.Wp, model.classes()});
      auto loss = tensor::cross_entropy(flat, std::span<const std::uint32_t>(b.targets), kIgnoreLabel);
      const double l = loss.item();
      if (!std::isfinite(l))
        throw TrainingError("segmentation loss diverged in epoch " + std::to_string(epoch),
                            static_cast<long>(epoch) - 1);
      tensor::backward(loss);
      opt.step(tc.lr);
      loss_sum += l;
      ++steps;
    }
    res.train_loss.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
    res.epochs_run = epoch;
    const double m = score();
    res.val_miou.push_back(m);
    if (m > res.best_val_miou) {
      res.best_val_miou = m;
      res.best_epoch = epoch;
      best = snapshot(model);
    } else if (epoch - res.best_epoch >= tc.patience) {
      break;
    }
  }
  restore(model, best);
  return res;
}

// -------------------------------------------------------------------- spectral

/// Labelled per-pixel feature vectors.
struct PixelSet {
  Split split = Split::Train;
  std::size_t dim = 0;
  std::vector<float> x;            // N*dim
  std::vector<std::uint32_t> y;    // N

  std::size_t size() const { return y.size(); }
  std::span<const float> row(std::size_t i) const { return std::span(x).subspan(i * dim, dim); }
};

/// Pixels of labelled cubes, skipping ignored ones; at most `max_per_cube`
/// pixels per cube (seeded choice, 0 = all).
inline PixelSet pixels_from_cubes(const std::vector<HyperCube>& cubes, Split split, std::size_t max_per_cube,
                                  std::uint64_t seed) {
  PixelSet out;
  out.split = split;
  for (std::size_t ci = 0; ci < cubes.size(); ++ci) {
    const auto& c = cubes[ci];
    if (!c.labels) throw Error(ErrorKind::Data, "spectral classification needs labelled cubes");
    if (out.dim == 0) out.dim = c.bands();
    if (c.bands() != out.dim) throw Error(ErrorKind::Data, "cubes disagree on band count");
    std::vector<std::size_t> idx;
    for (std::size_t p = 0; p < c.pixels(); ++p)
      if ((*c.labels)[p] != kIgnoreLabel) idx.push_back(p);
    if (max_per_cube && idx.size() > max_per_cube) {
      CounterRng rng(seed, stream("pixels").child(ci));
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(max_per_cube);
      std::sort(idx.begin(), idx.end());
    }
    for (auto p : idx) {
      auto px = c.pixel(p);
      out.x.insert(out.x.end(), px.begin(), px.end());
      out.y.push_back((*c.labels)[p]);
    }
  }
  return out;
}

inline std::vector<std::uint16_t> predict_spectral(SpectralModel<float>& model, const PixelSet& data,
                                                   std::size_t chunk = 512) {
  std::vector<std::uint16_t> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t n = std::min(chunk, data.size() - start);
    std::vector<float> v(data.x.begin() + static_cast<long>(start * data.dim),
                         data.x.begin() + static_cast<long>((start + n) * data.dim));
    auto logits = model.logits(tensor::Tensor<float>({n, data.dim}, std::move(v)), false);
    auto p = detail::argmax_rows(std::span<const float>(logits.data()), model.classes());
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

inline ConfusionMatrix evaluate_spectral(SpectralModel<float>& model, const PixelSet& data) {
  ConfusionMatrix cm(model.classes());
  cm.accumulate(predict_spectral(model, data), data.y);
  return cm;
}

/// Per-pixel training; same early-stopping rule as train_segmentation.
inline TrainResult train_spectral(SpectralModel<float>& model, const PixelSet& train, const PixelSet& val,
                                  const TrainConfig& tc) {
  tc.validate();
  if (train.split != Split::Train || val.split != Split::Val)
    throw Error(ErrorKind::Protocol, "spectral training received data with the wrong split tag");
  if (train.size() == 0 || val.size() == 0) throw Error(ErrorKind::Data, "empty spectral split");
  if (train.dim != model.input_dim() || val.dim != model.input_dim())
    throw Error(ErrorKind::Dimension, "pixel dimension " + std::to_string(train.dim) + " vs model input " +
                                          std::to_string(model.input_dim()));

  TrainResult res;
  auto score = [&] { return miou(evaluate_spectral(model, val)); };
  auto params = model.params();
  res.best_val_miou = score();
  res.val_miou.push_back(res.best_val_miou);
  auto best = store_all(params);

  tensor::Optimizer<float> opt(tc.optimizer, params);
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    CounterRng rng(tc.seed, stream("spectral.epoch").child(epoch));
    const auto order = rng.permutation(train.size());
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t n = std::min(tc.batch, order.size() - start);
      std::vector<float> x;
      std::vector<std::uint32_t> y;
      x.reserve(n * train.dim);
      for (std::size_t i = start; i < start + n; ++i) {
        auto r = train.row(order[i]);
        x.insert(x.end(), r.begin(), r.end());
        y.push_back(train.y[order[i]]);
      }
      opt.zero_grad();
      auto logits = model.logits(tensor::Tensor<float>({n, train.dim}, std::move(x)), true);
      auto loss = tensor::cross_entropy(logits, std::span<const std::uint32_t>(y), kIgnoreLabel);
      const double l = loss.item();
      if (!std::isfinite(l))
        throw TrainingError("spectral loss diverged in epoch " + std::to_string(epoch), static_cast<long>(epoch) - 1);
      tensor::backward(loss);
      opt.step(tc.lr);
      loss_sum += l;
      ++steps;
    }
    res.train_loss.push_back(loss_sum / static_cast<double>(std::max<std::size_t>(steps, 1)));
    res.epochs_run = epoch;
    const double m = score();
    res.val_miou.push_back(m);
    if (m > res.best_val_miou) {
      res.best_val_miou = m;
      res.best_epoch = epoch;
      best = store_all(params);
    } else if (epoch - res.best_epoch >= tc.patience) {
      break;
    }
  }
  restore_all(params, best);
  return res;
}

enum class SpectralKind { JustoLiu, MiniRocket, HdcMiniRocket, BackboneFC, BackboneFinetune };

inline const char* to_string(SpectralKind k) {
  switch (k) {
    case SpectralKind::JustoLiu: return "justoliu";
    case SpectralKind::MiniRocket: return "minirocket";
    case SpectralKind::HdcMiniRocket: return "hdc-minirocket";
    case SpectralKind::BackboneFC: return "backbone-fc";
    case SpectralKind::BackboneFinetune: return "backbone-finetune";
  }
  return "?";
}

inline SpectralKind parse_spectral_kind(std::string_view s) {
  for (auto k : {SpectralKind::JustoLiu, SpectralKind::MiniRocket, SpectralKind::HdcMiniRocket,
                 SpectralKind::BackboneFC, SpectralKind::BackboneFinetune})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::Config, "unknown spectral model '" + std::string(s) + "'");
}

/// Per-model defaults: learning rates 1e-1, 3e-4, 3e-4, 1e-4, 1e-4 in the
/// order of SpectralKind, at most 100 epochs. The 1D CNN uses SGD.
inline TrainConfig default_spectral_train(SpectralKind k) {
  TrainConfig tc;
  tc.batch = 64;
  tc.max_epochs = 100;
  tc.patience = 20;
  switch (k) {
    case SpectralKind::JustoLiu: tc.lr = 1e-1; tc.optimizer = "sgd"; break;
    case SpectralKind::MiniRocket: tc.lr = 3e-4; break;
    case SpectralKind::HdcMiniRocket: tc.lr = 3e-4; break;
    case SpectralKind::BackboneFC: tc.lr = 1e-4; break;
    case SpectralKind::BackboneFinetune: tc.lr = 1e-4; break;
  }
  return tc;
}

// ------------------------------------------------------------------- head file

inline constexpr std::uint32_t kHeadVersion = 1;

/// A trained head: model kind, its configuration text, weights and buffers.
struct HeadFile {
  std::string kind;
  std::string config;
  std::vector<StoredArray> weights, buffers;

  bool operator==(const HeadFile&) const = default;
};

inline std::vector<std::uint8_t> encode_head(const HeadFile& h) {
  ByteWriter w;
  w.str(h.kind);
  w.str(h.config);
  w.u32(static_cast<std::uint32_t>(h.weights.size()));
  for (const auto& a : h.weights) write_array(w, a);
  w.u32(static_cast<std::uint32_t>(h.buffers.size()));
  for (const auto& a : h.buffers) write_array(w, a);
  return wrap_container("MHED", kHeadVersion, w.take());
}

inline HeadFile decode_head(std::span<const std::uint8_t> bytes) {
  auto view = open_container(bytes, "MHED", kHeadVersion);
  PayloadReader r(view);
  HeadFile h;
  h.kind = r.str();
  h.config = r.str();
  for (auto n = r.u32(); n > 0; --n) h.weights.push_back(read_array(r));
  for (auto n = r.u32(); n > 0; --n) h.buffers.push_back(read_array(r));
  if (r.remaining()) throw FormatError("trailing bytes in head payload", r.file_offset());
  return h;
}

inline void save_head(const HeadFile& h, const std::string& path) { write_file_bytes(path, encode_head(h)); }
inline HeadFile load_head(const std::string& path) { return decode_head(read_file_bytes(path)); }

}  // namespace hsx
