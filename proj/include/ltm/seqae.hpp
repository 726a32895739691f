#pragma once

// Sequence-to-sequence LSTM autoencoder whose weights live in one flat
// vector. All model code is written once against an "ops" type (Graph for
// training, PlainOps for inference) so both paths compute identical values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltm/numeric/graph.hpp"
#include "ltm/numeric/plain_ops.hpp"

namespace ltm {

using numeric::Vec;
using Frame = Vec;
using Window = std::vector<Frame>;

namespace seqae {

/// Channel layout of one frame: bit channels, then real-valued action
/// channels, then an optional call-tag channel.
struct FrameSchema {
  std::size_t bits = 0;
  std::size_t actions = 0;
  bool tagged = false;

  std::size_t data_width() const { return bits + actions; }
  std::size_t width() const { return bits + actions + (tagged ? 1 : 0); }
  std::size_t tag_index() const { return bits + actions; }
  bool operator==(const FrameSchema&) const = default;
};

struct ModelShape {
  FrameSchema frame;
  std::size_t hidden = 64;
  std::size_t thought = 64;

  bool projected() const { return thought != hidden; }
  bool operator==(const ModelShape&) const = default;
};

struct BlockSpec {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
};

/// Block order: enc.W enc.b dec.W dec.b out.W out.b [proj.enc.W proj.enc.b
/// proj.dec.W proj.dec.b]. Gate rows within the LSTM blocks are ordered
/// input, forget, candidate, output.
struct ParamLayout {
  ModelShape shape;
  std::vector<BlockSpec> blocks;
  std::size_t total = 0;

  const BlockSpec& block(std::string_view name) const {
    for (const BlockSpec& b : blocks) {
      if (b.name == name) return b;
    }
    throw std::out_of_range("ParamLayout: no block named " + std::string(name));
  }
};

inline ParamLayout param_layout(const ModelShape& shape) {
  const std::size_t w = shape.frame.width();
  const std::size_t h = shape.hidden;
  const std::size_t t = shape.thought;
  if (w == 0 || h == 0 || t == 0) {
    throw std::invalid_argument("param_layout: dimensions must be positive");
  }
  ParamLayout layout;
  layout.shape = shape;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    layout.blocks.push_back(BlockSpec{std::move(name), layout.total, rows, cols});
    layout.total += rows * cols;
  };
  add("enc.W", 4 * h, w + h);
  add("enc.b", 4 * h, 1);
  add("dec.W", 4 * h, w + h);
  add("dec.b", 4 * h, 1);
  add("out.W", w, h);
  add("out.b", w, 1);
  if (shape.projected()) {
    add("proj.enc.W", t, h);
    add("proj.enc.b", t, 1);
    add("proj.dec.W", h, t);
    add("proj.dec.b", h, 1);
  }
  return layout;
}

/// Layout for frames of `width` bit channels.
inline ParamLayout param_layout(std::size_t width, std::size_t hidden, std::size_t thought) {
  return param_layout(ModelShape{FrameSchema{width, 0, false}, hidden, thought});
}

template <class Ops>
struct Weights {
  using V = typename Ops::Value;
  V enc_w, enc_b, dec_w, dec_b, out_w, out_b;
  V proj_enc_w, proj_enc_b, proj_dec_w, proj_dec_b;
};

/// Slices the flat parameter vector into named blocks.
template <class Ops>
Weights<Ops> bind_weights(Ops& ops, const typename Ops::Value& flat, const ParamLayout& layout) {
  auto cut = [&](std::string_view name) {
    const BlockSpec& b = layout.block(name);
    return ops.slice(flat, b.offset, b.size());
  };
  Weights<Ops> w{cut("enc.W"), cut("enc.b"), cut("dec.W"), cut("dec.b"), cut("out.W"), cut("out.b"),
                 {}, {}, {}, {}};
  if (layout.shape.projected()) {
    w.proj_enc_w = cut("proj.enc.W");
    w.proj_enc_b = cut("proj.enc.b");
    w.proj_dec_w = cut("proj.dec.W");
    w.proj_dec_b = cut("proj.dec.b");
  }
  return w;
}

/// Standard gated update; returns (h', c').
template <class Ops>
std::pair<typename Ops::Value, typename Ops::Value> lstm_cell(Ops& ops, const typename Ops::Value& x,
                                                              const typename Ops::Value& h,
                                                              const typename Ops::Value& c,
                                                              const typename Ops::Value& weight,
                                                              const typename Ops::Value& bias,
                                                              std::size_t input_width,
                                                              std::size_t hidden) {
  auto z = ops.add(ops.matvec(weight, ops.concat({x, h}), 4 * hidden, input_width + hidden), bias);
  auto in_gate = ops.sigmoid(ops.slice(z, 0, hidden));
  auto forget_gate = ops.sigmoid(ops.slice(z, hidden, hidden));
  auto candidate = ops.tanh(ops.slice(z, 2 * hidden, hidden));
  auto out_gate = ops.sigmoid(ops.slice(z, 3 * hidden, hidden));
  auto c_next = ops.add(ops.mul(forget_gate, c), ops.mul(in_gate, candidate));
  auto h_next = ops.mul(out_gate, ops.tanh(c_next));
  return {h_next, c_next};
}

template <class Ops>
typename Ops::Value encode(Ops& ops, const Weights<Ops>& w, const ModelShape& shape,
                           std::span<const Frame> frames) {
  const std::size_t width = shape.frame.width();
  const std::size_t hid = shape.hidden;
  auto h = ops.constant(Vec(hid, 0.0));
  auto c = ops.constant(Vec(hid, 0.0));
  for (const Frame& f : frames) {
    if (f.size() != width) {
      throw std::invalid_argument("encode: frame width " + std::to_string(f.size()) +
                                  " != " + std::to_string(width));
    }
    std::tie(h, c) = lstm_cell(ops, ops.constant(f), h, c, w.enc_w, w.enc_b, width, hid);
  }
  if (shape.projected()) {
    return ops.add(ops.matvec(w.proj_enc_w, h, shape.thought, hid), w.proj_enc_b);
  }
  return h;
}

template <class Ops>
typename Ops::Value decoder_start(Ops& ops, const Weights<Ops>& w, const ModelShape& shape,
                                  const typename Ops::Value& thought) {
  if (shape.projected()) {
    return ops.add(ops.matvec(w.proj_dec_w, thought, shape.hidden, shape.thought), w.proj_dec_b);
  }
  return thought;
}

/// A target frame whose tag channel is set carries a call payload.
inline bool is_call_frame(const FrameSchema& schema, const Frame& f) {
  return schema.tagged && f[schema.tag_index()] > 0.5;
}

/// Per-frame loss from output logits. Literal frames: mean bit cross-entropy
/// plus mean action squared error. Call frames: mean squared error of the raw
/// data outputs against the payload. The tag channel adds its own
/// cross-entropy term when present.
template <class Ops>
typename Ops::Value frame_loss(Ops& ops, const typename Ops::Value& logits, const Frame& target,
                               const FrameSchema& schema) {
  using V = typename Ops::Value;
  std::vector<V> terms;
  auto target_part = [&](std::size_t off, std::size_t len) {
    return ops.constant(Vec(target.begin() + static_cast<std::ptrdiff_t>(off),
                            target.begin() + static_cast<std::ptrdiff_t>(off + len)));
  };
  if (is_call_frame(schema, target)) {
    const std::size_t n = schema.data_width();
    terms.push_back(ops.scale(ops.squared_error(ops.slice(logits, 0, n), target_part(0, n)),
                              1.0 / static_cast<double>(n)));
  } else {
    if (schema.bits > 0) {
      terms.push_back(
          ops.scale(ops.sigmoid_cross_entropy(ops.slice(logits, 0, schema.bits), target_part(0, schema.bits)),
                    1.0 / static_cast<double>(schema.bits)));
    }
    if (schema.actions > 0) {
      terms.push_back(ops.scale(ops.squared_error(ops.slice(logits, schema.bits, schema.actions),
                                                  target_part(schema.bits, schema.actions)),
                                1.0 / static_cast<double>(schema.actions)));
    }
  }
  if (schema.tagged) {
    const std::size_t t = schema.tag_index();
    terms.push_back(ops.sigmoid_cross_entropy(ops.slice(logits, t, 1), target_part(t, 1)));
  }
  if (terms.size() == 1) return terms.front();
  return ops.sum(ops.concat(std::span<const V>(terms)));
}

/// Teacher-forced decoding loss averaged over target frames. The decoder starts
/// from the thought with zero cell state and a zero input frame, then consumes
/// the previous target frame at each later step.
template <class Ops>
typename Ops::Value sequence_loss(Ops& ops, const Weights<Ops>& w, const ModelShape& shape,
                                  const typename Ops::Value& thought, std::span<const Frame> targets) {
  using V = typename Ops::Value;
  if (targets.empty()) throw std::invalid_argument("sequence_loss: empty target");
  const std::size_t width = shape.frame.width();
  const std::size_t hid = shape.hidden;
  V h = decoder_start(ops, w, shape, thought);
  V c = ops.constant(Vec(hid, 0.0));
  std::vector<V> losses;
  losses.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t].size() != width) throw std::invalid_argument("sequence_loss: target width mismatch");
    V x = ops.constant(t == 0 ? Vec(width, 0.0) : targets[t - 1]);
    std::tie(h, c) = lstm_cell(ops, x, h, c, w.dec_w, w.dec_b, width, hid);
    V logits = ops.add(ops.matvec(w.out_w, h, width, hid), w.out_b);
    losses.push_back(frame_loss(ops, logits, targets[t], shape.frame));
  }
  V total = losses.size() == 1 ? losses.front() : ops.sum(ops.concat(std::span<const V>(losses)));
  return ops.scale(total, 1.0 / static_cast<double>(targets.size()));
}

/// encode(input) then teacher-forced loss against target.
template <class Ops>
typename Ops::Value pair_loss(Ops& ops, const Weights<Ops>& w, const ModelShape& shape,
                              std::span<const Frame> input, std::span<const Frame> target) {
  if (input.empty()) throw std::invalid_argument("pair_loss: empty input window");
  auto thought = encode(ops, w, shape, input);
  return sequence_loss(ops, w, shape, thought, target);
}

/// Output activation: sigmoid on bits and tag, identity on actions. When the
/// tag fires, the data channels are emitted raw (they carry a call payload).
inline Frame activate(const Vec& logits, const FrameSchema& schema) {
  Frame out(logits.size());
  const bool call = schema.tagged && numeric::kernels::sigmoid(logits[schema.tag_index()]) > 0.5;
  for (std::size_t i = 0; i < schema.data_width(); ++i) {
    out[i] = (call || i >= schema.bits) ? logits[i] : numeric::kernels::sigmoid(logits[i]);
  }
  if (schema.tagged) out[schema.tag_index()] = numeric::kernels::sigmoid(logits[schema.tag_index()]);
  return out;
}

/// Inference-side autoencoder bound to one flat parameter vector.
class Autoencoder {
 public:
  Autoencoder(const ModelShape& shape, const Vec& flat) : layout_(param_layout(shape)) {
    if (flat.size() != layout_.total) {
      throw std::invalid_argument("Autoencoder: parameter vector has length " +
                                  std::to_string(flat.size()) + ", layout needs " +
                                  std::to_string(layout_.total));
    }
    numeric::PlainOps ops;
    weights_ = bind_weights(ops, flat, layout_);
  }

  const ModelShape& shape() const { return layout_.shape; }
  const ParamLayout& layout() const { return layout_; }

  Vec encode(std::span<const Frame> window) const {
    if (window.empty()) throw std::invalid_argument("encode: empty window");
    numeric::PlainOps ops;
    return seqae::encode(ops, weights_, shape(), window);
  }

  /// Free-running decode of `length` frames, feeding back emitted frames.
  Window decode(const Vec& thought, std::size_t length) const {
    if (length == 0) throw std::invalid_argument("decode: length must be >= 1");
    if (thought.size() != shape().thought) throw std::invalid_argument("decode: thought width mismatch");
    numeric::PlainOps ops;
    const std::size_t width = shape().frame.width();
    const std::size_t hid = shape().hidden;
    Vec h = decoder_start(ops, weights_, shape(), thought);
    Vec c(hid, 0.0);
    Frame x(width, 0.0);
    Window out;
    out.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      std::tie(h, c) = lstm_cell(ops, x, h, c, weights_.dec_w, weights_.dec_b, width, hid);
      x = activate(ops.add(ops.matvec(weights_.out_w, h, width, hid), weights_.out_b), shape().frame);
      out.push_back(x);
    }
    return out;
  }

  /// Teacher-forced loss of decode(encode(input)) against target.
  double loss(std::span<const Frame> input, std::span<const Frame> target) const {
    numeric::PlainOps ops;
    return pair_loss(ops, weights_, shape(), input, target)[0];
  }
  double loss(std::span<const Frame> window) const { return loss(window, window); }

  /// Teacher-forced loss of decoding a given thought against target.
  double thought_loss(const Vec& thought, std::span<const Frame> target) const {
    numeric::PlainOps ops;
    return sequence_loss(ops, weights_, shape(), thought, target)[0];
  }

 private:
  ParamLayout layout_;
  Weights<numeric::PlainOps> weights_;
};

inline Vec encode(const Window& window, const Vec& flat, const ModelShape& shape) {
  return Autoencoder(shape, flat).encode(window);
}

inline Window decode(const Vec& thought, std::size_t length, const Vec& flat, const ModelShape& shape) {
  return Autoencoder(shape, flat).decode(thought, length);
}

/// Plain LSTM step with weights for `input_width` inputs and `hidden` units.
inline std::pair<Vec, Vec> lstm_cell(const Vec& x, const Vec& h, const Vec& c, const Vec& weight,
                                     const Vec& bias, std::size_t hidden) {
  numeric::PlainOps ops;
  if (h.size() != hidden || c.size() != hidden || bias.size() != 4 * hidden ||
      weight.size() != 4 * hidden * (x.size() + hidden)) {
    throw std::invalid_argument("lstm_cell: shape mismatch");
  }
  return lstm_cell(ops, x, h, c, weight, bias, x.size(), hidden);
}

inline constexpr double kProbabilityClamp = 1e-7;

/// Loss between a window and a reconstruction given as probabilities (bit
/// channels) and raw values (action channels), averaged over frames.
inline double reconstruction_loss(std::span<const Frame> window, std::span<const Frame> reconstruction,
                                  const FrameSchema& schema) {
  if (window.size() != reconstruction.size() || window.empty()) {
    throw std::invalid_argument("reconstruction_loss: windows differ in length or are empty");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < window.size(); ++t) {
    const Frame& x = window[t];
    const Frame& y = reconstruction[t];
    if (x.size() != schema.width() || y.size() != schema.width()) {
      throw std::invalid_argument("reconstruction_loss: frame width mismatch");
    }
    double bits = 0.0;
    for (std::size_t i = 0; i < schema.bits; ++i) {
      const double p = std::clamp(y[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
      bits -= x[i] * std::log(p) + (1.0 - x[i]) * std::log(1.0 - p);
    }
    double actions = 0.0;
    for (std::size_t i = schema.bits; i < schema.data_width(); ++i) {
      actions += (x[i] - y[i]) * (x[i] - y[i]);
    }
    if (schema.bits > 0) total += bits / static_cast<double>(schema.bits);
    if (schema.actions > 0) total += actions / static_cast<double>(schema.actions);
  }
  return total / static_cast<double>(window.size());
}

/// Fraction of bit channels on which `reconstruction` thresholded at 0.5
/// agrees with `window`.
inline double bit_accuracy(std::span<const Frame> window, std::span<const Frame> reconstruction,
                           std::size_t bits) {
  if (window.size() != reconstruction.size()) {
    throw std::invalid_argument("bit_accuracy: windows differ in length");
  }
  std::size_t hit = 0;
  std::size_t total = 0;
  for (std::size_t t = 0; t < window.size(); ++t) {
    for (std::size_t i = 0; i < bits; ++i) {
      hit += ((window[t][i] > 0.5) == (reconstruction[t][i] > 0.5)) ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace seqae
}  // namespace ltm
