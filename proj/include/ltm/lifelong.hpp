#pragma once

// The controller around a program bank and a vector memory: buffering of the
// incoming stream, segmentation, consolidation with replay, recall,
// consequent prediction, continuation chains and explain-away encoding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltm/bank.hpp"
#include "ltm/vmem.hpp"

namespace ltm::lifelong {

using bank::ProgramBank;
using bank::TrainingPair;

// ---------------------------------------------------------------------------
// stream buffer

/// Fixed-capacity frame buffer. When a frame arrives while the buffer is
/// full, the callback receives the full contents and the buffer restarts
/// with the new frame.
class StreamBuffer {
 public:
  using Callback = std::function<void(std::span<const Frame> frames, std::uint64_t first_position)>;

  StreamBuffer(std::size_t width, std::size_t capacity = 4096, Callback on_full = {})
      : width_(width), capacity_(capacity), on_full_(std::move(on_full)) {
    if (width == 0) throw std::invalid_argument("StreamBuffer: width must be >= 1");
    if (capacity == 0) throw std::invalid_argument("StreamBuffer: capacity must be >= 1");
    frames_.reserve(capacity);
  }

  /// Appends frames in order. All widths are checked before anything is
  /// appended.
  void ingest(std::span<const Frame> frames) {
    for (const Frame& f : frames) {
      if (f.size() != width_) {
        throw std::invalid_argument("ingest: frame width " + std::to_string(f.size()) + ", expected " +
                                    std::to_string(width_));
      }
    }
    for (const Frame& f : frames) {
      if (full()) drain();
      frames_.push_back(f);
    }
  }

  /// Hands the current contents to the callback even if not full.
  void flush() {
    if (!frames_.empty()) drain();
  }

  void set_callback(Callback on_full) { on_full_ = std::move(on_full); }
  bool full() const { return frames_.size() == capacity_; }
  std::size_t size() const { return frames_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t width() const { return width_; }
  std::size_t drains() const { return drains_; }
  std::uint64_t position() const { return position_; }  // stream index of frames()[0]
  std::span<const Frame> frames() const { return frames_; }

 private:
  void drain() {
    if (on_full_) on_full_(frames_, position_);
    ++drains_;
    position_ += frames_.size();
    frames_.clear();
  }

  std::size_t width_;
  std::size_t capacity_;
  Callback on_full_;
  std::vector<Frame> frames_;
  std::size_t drains_ = 0;
  std::uint64_t position_ = 0;
};

// ---------------------------------------------------------------------------
// segmentation

struct Span {
  std::size_t start = 0;
  std::size_t length = 0;
  bool operator==(const Span&) const = default;
};

using Segmentation = std::vector<Span>;

/// Consecutive spans of length L from frame 0; a remainder shorter than L is
/// dropped.
inline Segmentation segment_fixed(std::size_t frames, std::size_t length) {
  if (length == 0) throw std::invalid_argument("segment_fixed: length must be >= 1");
  Segmentation out;
  for (std::size_t s = 0; s + length <= frames; s += length) out.push_back({s, length});
  return out;
}

using SpanCost = std::function<double(const Span&)>;

struct DpResult {
  Segmentation spans;
  double cost = 0.0;
};

/// Minimum-cost tiling of [0, frames) by spans whose lengths come from
/// `allowed`. Costs are summed left to right. Among equal costs the tiling
/// with fewer spans wins, then the one whose last span is longest.
inline DpResult segment_dp(std::size_t frames, std::span<const std::size_t> allowed, const SpanCost& cost) {
  if (allowed.empty()) throw std::invalid_argument("segment_dp: allowed lengths must be nonempty");
  std::vector<std::size_t> lengths(allowed.begin(), allowed.end());
  std::sort(lengths.begin(), lengths.end(), std::greater<>());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  if (lengths.back() == 0) throw std::invalid_argument("segment_dp: lengths must be >= 1");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(frames + 1, kInf);
  std::vector<std::size_t> count(frames + 1, 0);
  std::vector<std::size_t> choice(frames + 1, 0);
  best[0] = 0.0;
  for (std::size_t i = 1; i <= frames; ++i) {
    for (std::size_t len : lengths) {
      if (len > i || best[i - len] == kInf) continue;
      const double c = cost(Span{i - len, len});
      if (!(c >= 0.0) || !std::isfinite(c)) throw std::domain_error("segment_dp: span cost must be finite and >= 0");
      const double total = best[i - len] + c;
      const std::size_t n = count[i - len] + 1;
      if (total < best[i] || (total == best[i] && n < count[i])) {
        best[i] = total;
        count[i] = n;
        choice[i] = len;
      }
    }
  }
  if (best[frames] == kInf) {
    throw std::invalid_argument("segment_dp: " + std::to_string(frames) +
                                " frames cannot be tiled by the allowed lengths");
  }
  DpResult out;
  out.cost = best[frames];
  for (std::size_t i = frames; i > 0; i -= choice[i]) out.spans.push_back({i - choice[i], choice[i]});
  std::reverse(out.spans.begin(), out.spans.end());
  return out;
}

/// Longest prefix of `frames` that the allowed lengths can tile.
inline std::size_t coverable_prefix(std::size_t frames, std::span<const std::size_t> allowed) {
  std::vector<char> ok(frames + 1, 0);
  ok[0] = 1;
  std::size_t last = 0;
  for (std::size_t i = 1; i <= frames; ++i) {
    for (std::size_t len : allowed) {
      if (len > 0 && len <= i && ok[i - len]) {
        ok[i] = 1;
        last = i;
        break;
      }
    }
  }
  return last;
}

inline Window slice(std::span<const Frame> frames, const Span& s) {
  return Window(frames.begin() + static_cast<std::ptrdiff_t>(s.start),
                frames.begin() + static_cast<std::ptrdiff_t>(s.start + s.length));
}

/// Span cost for segment_dp: routed min-loss times span length (the span's
/// code length under its best program) plus a constant per span.
inline SpanCost routed_span_cost(std::span<const Frame> frames, const ProgramBank& bank, double per_span) {
  return [frames, &bank, per_span](const Span& s) {
    const Window w = slice(frames, s);
    return bank::route(w, bank).min_loss * static_cast<double>(s.length) + per_span;
  };
}

// ---------------------------------------------------------------------------
// controller

struct EncodedCall {
  ProgramId program = 0;
  Vec thought;
  Span span;
};

enum class PredictMode { kAverage, kMulti };

inline PredictMode parse_mode(const std::string& s) {
  if (s == "average") return PredictMode::kAverage;
  if (s == "multi") return PredictMode::kMulti;
  throw std::invalid_argument("unknown prediction mode '" + s + "' (expected average or multi)");
}

struct LifelongConfig {
  std::size_t window = 7;
  std::vector<std::size_t> allowed_lengths;  // empty: fixed windows of `window`
  double span_cost = 0.0;
  std::size_t buffer_capacity = 4096;
  double replay_ratio = 0.3;
  std::size_t replay_pool = 256;  // episodic records decoded per consolidation
  std::size_t steps_per_consolidation = 200;
  std::size_t batch_size = 16;
  bool grow = false;
  bank::GrowthPolicy growth;
  bool prediction_loss = false;  // train decode(thought of window t) against window t+1
  bool store_consequents = true;
  std::uint64_t seed = 0;
};

struct ConsolidationMetrics {
  std::size_t step = 0;  // optimizer steps so far
  double mean_min_loss = 0.0;
  std::size_t n_programs = 0;
  double replay_fraction = 0.0;
  std::size_t buffer_fill = 0;  // frames consolidated
};

inline void write_metrics_csv(std::ostream& out, std::span<const ConsolidationMetrics> rows) {
  out << "step,mean_min_loss,n_programs,replay_fraction,buffer_fill\n";
  const auto old = out.precision(17);
  for (const auto& m : rows) {
    out << m.step << ',' << m.mean_min_loss << ',' << m.n_programs << ',' << m.replay_fraction << ','
        << m.buffer_fill << '\n';
  }
  out.precision(old);
}

struct Recollection {
  vmem::RecordId id = 0;
  ProgramId program = 0;
  double distance = 0.0;
  Window reconstruction;
};

/// Bit channels rounded to {0,1}; other channels unchanged.
inline Window threshold_bits(Window w, std::size_t bits) {
  for (Frame& f : w) {
    for (std::size_t i = 0; i < std::min(bits, f.size()); ++i) f[i] = f[i] >= 0.5 ? 1.0 : 0.0;
  }
  return w;
}

class Lifelong {
 public:
  Lifelong(ProgramBank bank, LifelongConfig config, vmem::VectorMemory memory = vmem::VectorMemory{})
      : bank_(std::move(bank)),
        memory_(std::move(memory)),
        config_(std::move(config)),
        rng_(config_.seed),
        buffer_(bank_.shape().frame.width(), config_.buffer_capacity) {
    if (config_.window == 0) throw std::invalid_argument("Lifelong: window must be >= 1");
    if (!(config_.replay_ratio >= 0.0 && config_.replay_ratio <= 1.0)) {
      throw std::invalid_argument("Lifelong: replay ratio must lie in [0, 1]");
    }
    if (config_.batch_size == 0) throw std::invalid_argument("Lifelong: batch size must be >= 1");
    buffer_.set_callback([this](std::span<const Frame> frames, std::uint64_t first) { consolidate(frames, first); });
  }

  Lifelong(const Lifelong&) = delete;
  Lifelong& operator=(const Lifelong&) = delete;

  ProgramBank& bank() { return bank_; }
  const ProgramBank& bank() const { return bank_; }
  vmem::VectorMemory& memory() { return memory_; }
  const vmem::VectorMemory& memory() const { return memory_; }
  const LifelongConfig& config() const { return config_; }
  LifelongConfig& mutable_config() { return config_; }
  const StreamBuffer& buffer() const { return buffer_; }
  const std::vector<ConsolidationMetrics>& history() const { return history_; }

  /// Buffers frames; every time the buffer fills, its contents are
  /// consolidated before new frames are accepted.
  void ingest(std::span<const Frame> frames) { buffer_.ingest(frames); }

  /// Consolidates whatever is still buffered.
  void flush() { buffer_.flush(); }

  Segmentation segment(std::span<const Frame> frames) const {
    if (config_.allowed_lengths.empty()) return segment_fixed(frames.size(), config_.window);
    const std::size_t n = coverable_prefix(frames.size(), config_.allowed_lengths);
    return segment_dp(n, config_.allowed_lengths, routed_span_cost(frames, bank_, config_.span_cost)).spans;
  }

  /// Trains the bank on the frames mixed with windows replayed from episodic
  /// memory, then writes each window (and each successor link) to memory.
  /// `first_position` is the stream index of frames[0].
  ConsolidationMetrics consolidate(std::span<const Frame> frames, std::uint64_t first_position = 0) {
    const Segmentation spans = segment(frames);
    std::vector<Window> windows;
    windows.reserve(spans.size());
    for (const Span& s : spans) windows.push_back(slice(frames, s));

    std::vector<TrainingPair> fresh;
    if (config_.prediction_loss) {
      for (std::size_t i = 0; i + 1 < windows.size(); ++i) fresh.push_back({windows[i], windows[i + 1]});
    } else {
      for (const Window& w : windows) fresh.push_back(TrainingPair::reconstruction(w));
    }
    const std::vector<TrainingPair> replay = replay_windows();

    ConsolidationMetrics m;
    std::size_t replayed = 0;
    std::size_t total = 0;
    if (!fresh.empty() || !replay.empty()) {
      const double ratio = fresh.empty() ? 1.0 : (replay.empty() ? 0.0 : config_.replay_ratio);
      const auto n_replay =
          static_cast<std::size_t>(std::llround(ratio * static_cast<double>(config_.batch_size)));
      std::vector<TrainingPair> batch(config_.batch_size);
      for (std::size_t s = 0; s < config_.steps_per_consolidation; ++s) {
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const bool from_replay = b < n_replay;
          const auto& pool = from_replay ? replay : fresh;
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          batch[b] = pool[pick(rng_)];
        }
        bank::train_step(batch, bank_);
        ++steps_;
        replayed += n_replay;
        total += batch.size();
      }
      if (config_.grow && !fresh.empty()) {
        bank::GrowthPolicy policy = config_.growth;
        policy.seed = config_.growth.seed + history_.size();
        bank::grow(bank_, fresh, policy);
      }
    }

    std::vector<std::pair<ProgramId, Vec>> encoded;
    encoded.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const ProgramId p = bank::route(windows[i], bank_).argmin;
      Vec thought = bank_.autoencoder(p).encode(windows[i]);
      memory_.write(vmem::to_key(thought), vmem::Episodic{p, thought, first_position + spans[i].start});
      encoded.emplace_back(p, std::move(thought));
    }
    if (config_.store_consequents) {
      for (std::size_t i = 0; i + 1 < encoded.size(); ++i) {
        memory_.write(vmem::to_key(encoded[i].second), vmem::Consequent{encoded[i + 1].second, encoded[i + 1].first});
      }
    }

    m.step = steps_;
    m.mean_min_loss = bank::mean_min_loss(fresh, bank_);
    m.n_programs = bank_.size();
    m.replay_fraction = total == 0 ? 0.0 : static_cast<double>(replayed) / static_cast<double>(total);
    m.buffer_fill = frames.size();
    history_.push_back(m);
    return m;
  }

  /// Nearest episodic memories of the query, decoded with their stored
  /// programs, nearest first. Empty memory gives an empty list.
  std::vector<Recollection> recall(std::span<const Frame> query, std::size_t k) const {
    if (k == 0) throw std::invalid_argument("recall: k must be >= 1");
    if (query.empty()) throw std::invalid_argument("recall: empty query");
    const ProgramId p = bank::route(query, bank_).argmin;
    const Vec thought = bank_.autoencoder(p).encode(query);
    std::vector<Recollection> out;
    for (const vmem::Hit& h : memory_.read(vmem::to_key(thought), k, vmem::PayloadKind::kEpisodic)) {
      const auto& e = std::get<vmem::Episodic>(h.record.value);
      out.push_back({h.record.id, e.program, h.distance, bank_.autoencoder(e.program).decode(e.thought, query.size())});
    }
    return out;
  }

  /// Stores the successor of window t under window t's thought.
  vmem::RecordId store_consequent(std::span<const Frame> current, std::span<const Frame> next) {
    const ProgramId p = bank::route(current, bank_).argmin;
    const ProgramId q = bank::route(next, bank_).argmin;
    const Vec key = vmem::to_key(bank_.autoencoder(p).encode(current));
    return memory_.write(key, vmem::Consequent{bank_.autoencoder(q).encode(next), q});
  }

  /// Predicted successor window(s) from the k nearest consequent records.
  std::vector<Window> predict_next(std::span<const Frame> window, std::size_t k, PredictMode mode) const {
    if (k == 0) throw std::invalid_argument("predict_next: k must be >= 1");
    if (window.empty()) throw std::invalid_argument("predict_next: empty window");
    if (memory_.count(vmem::PayloadKind::kConsequent) == 0) {
      throw std::runtime_error("predict_next: no consequent records in memory");
    }
    const ProgramId p = bank::route(window, bank_).argmin;
    const auto hits =
        memory_.read(vmem::to_key(bank_.autoencoder(p).encode(window)), k, vmem::PayloadKind::kConsequent);
    std::vector<Window> out;
    if (mode == PredictMode::kMulti) {
      for (const vmem::Hit& h : hits) {
        const auto& c = std::get<vmem::Consequent>(h.record.value);
        out.push_back(bank_.autoencoder(c.next_program).decode(c.next_thought, window.size()));
      }
      return out;
    }
    Vec mean;
    double weight_sum = 0.0;
    std::map<ProgramId, std::size_t> votes;
    for (const vmem::Hit& h : hits) {
      const auto& c = std::get<vmem::Consequent>(h.record.value);
      const double w = 1.0 / (h.distance + 1e-6);
      if (mean.empty()) mean.assign(c.next_thought.size(), 0.0);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += w * c.next_thought[i];
      weight_sum += w;
      ++votes[c.next_program];
    }
    for (double& v : mean) v /= weight_sum;
    ProgramId modal = votes.begin()->first;
    for (const auto& [id, n] : votes) {
      if (n > votes[modal]) modal = id;
    }
    out.push_back(bank_.autoencoder(modal).decode(mean, window.size()));
    return out;
  }

 private:
  std::vector<TrainingPair> replay_windows() {
    std::vector<TrainingPair> out;
    if (config_.replay_ratio <= 0.0 || config_.replay_pool == 0) return out;
    std::vector<vmem::Record> episodic;
    for (vmem::Record& r : memory_.records()) {
      if (vmem::kind_of(r.value) == vmem::PayloadKind::kEpisodic) episodic.push_back(std::move(r));
    }
    if (episodic.empty()) return out;
    std::vector<std::size_t> order(episodic.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    order.resize(std::min(order.size(), config_.replay_pool));
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) {
      const auto& e = std::get<vmem::Episodic>(episodic[i].value);
      if (e.program >= bank_.size() || e.thought.size() != bank_.shape().thought) continue;
      Window w = bank_.autoencoder(e.program).decode(e.thought, config_.window);
      out.push_back(TrainingPair::reconstruction(threshold_bits(std::move(w), bank_.shape().frame.bits)));
    }
    return out;
  }

  ProgramBank bank_;
  vmem::VectorMemory memory_;
  LifelongConfig config_;
  std::mt19937_64 rng_;
  StreamBuffer buffer_;
  std::vector<ConsolidationMetrics> history_;
  std::size_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// continuation chains
//
// The bank's frame schema carries a tag channel. A call is two tagged frames:
// the program embedding and then the thought, each left-aligned in the data
// channels (the embedding is truncated to the data width). A window whose
// target has no call is padded with two untagged zero frames so every call
// decodes to its span length plus two.

inline void require_tagged(const ProgramBank& bank, const char* where) {
  if (!bank.shape().frame.tagged) throw std::invalid_argument(std::string(where) + ": bank schema has no tag channel");
}

/// Data-width frame -> schema-width literal frame (tag 0).
inline Frame literal_frame(const Frame& f, const seqae::FrameSchema& schema) {
  if (f.size() != schema.data_width()) {
    throw std::invalid_argument("continuation: frame width " + std::to_string(f.size()) + ", expected " +
                                std::to_string(schema.data_width()));
  }
  Frame out(f);
  out.push_back(0.0);
  return out;
}

inline std::pair<Frame, Frame> call_frames(const ProgramBank& bank, ProgramId program, const Vec& thought) {
  const auto& schema = bank.shape().frame;
  const std::size_t n = schema.data_width();
  if (thought.size() > n) throw std::invalid_argument("call_frames: thought wider than the data channels");
  Frame p(schema.width(), 0.0);
  Frame t(schema.width(), 0.0);
  const Vec& e = bank.program(program).embedding;
  std::copy_n(e.begin(), std::min(n, e.size()), p.begin());
  std::copy(thought.begin(), thought.end(), t.begin());
  p[schema.tag_index()] = 1.0;
  t[schema.tag_index()] = 1.0;
  return {p, t};
}

/// Program whose (truncated) embedding is nearest to the decoded call frame.
inline ProgramId resolve_program(const ProgramBank& bank, const Frame& decoded) {
  const std::size_t n = std::min(bank.shape().frame.data_width(), kProgramWidth);
  ProgramId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const ProgramVector& p : bank.programs()) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d += (decoded[i] - p.embedding[i]) * (decoded[i] - p.embedding[i]);
    if (d < best_d) {
      best_d = d;
      best = p.id;
    }
  }
  return best;
}

struct ContinuationStep {
  EncodedCall call;
  Window sequence;  // schema-width autoencoder sequence: literals then call or padding
};

/// Chain of calls covering `sequence` (data-width frames), head first. The
/// head span absorbs any remainder so the spans tile the whole sequence.
/// Sequences shorter than 2L give a single call.
inline std::vector<ContinuationStep> continuation_steps(std::span<const Frame> sequence, std::size_t window,
                                                        const ProgramBank& bank) {
  require_tagged(bank, "encode_continuation");
  if (window == 0) throw std::invalid_argument("encode_continuation: window must be >= 1");
  if (sequence.empty()) throw std::invalid_argument("encode_continuation: empty sequence");
  const auto& schema = bank.shape().frame;
  std::vector<Span> spans;
  if (sequence.size() < 2 * window) {
    spans.push_back({0, sequence.size()});
  } else {
    const std::size_t n = sequence.size() / window;
    const std::size_t head = window + sequence.size() % window;
    spans.push_back({0, head});
    for (std::size_t i = 1; i < n; ++i) spans.push_back({head + (i - 1) * window, window});
  }
  std::vector<ContinuationStep> steps(spans.size());
  std::optional<std::pair<Frame, Frame>> tail;
  for (std::size_t i = spans.size(); i-- > 0;) {
    Window seq;
    for (std::size_t t = 0; t < spans[i].length; ++t) seq.push_back(literal_frame(sequence[spans[i].start + t], schema));
    if (tail) {
      seq.push_back(tail->first);
      seq.push_back(tail->second);
    } else {
      seq.emplace_back(schema.width(), 0.0);
      seq.emplace_back(schema.width(), 0.0);
    }
    const ProgramId p = bank::route(seq, bank).argmin;
    Vec thought = bank.autoencoder(p).encode(seq);
    tail = call_frames(bank, p, thought);
    steps[i] = {EncodedCall{p, std::move(thought), spans[i]}, std::move(seq)};
  }
  return steps;
}

inline std::vector<EncodedCall> encode_continuation(std::span<const Frame> sequence, std::size_t window,
                                                    const ProgramBank& bank) {
  std::vector<EncodedCall> out;
  for (auto& s : continuation_steps(sequence, window, bank)) out.push_back(std::move(s.call));
  return out;
}

/// Unrolls a call: literal frames, then the called chain if the decoded tail
/// carries the tag. Each call consumes one unit of the depth limit. Returns
/// data-width frames (bit channels as probabilities).
inline Window decode_continuation(const EncodedCall& call, const ProgramBank& bank, std::size_t window,
                                  std::size_t depth_limit) {
  require_tagged(bank, "decode_continuation");
  const auto& schema = bank.shape().frame;
  Window out;
  EncodedCall current = call;
  std::size_t length = call.span.length;
  for (std::size_t depth = 0;; ++depth) {
    if (depth >= depth_limit) throw std::runtime_error("decode_continuation: depth limit exceeded");
    const Window w = bank.autoencoder(current.program).decode(current.thought, length + 2);
    for (std::size_t t = 0; t < length; ++t) out.emplace_back(w[t].begin(), w[t].begin() + static_cast<std::ptrdiff_t>(schema.data_width()));
    const Frame& p = w[length];
    const Frame& th = w[length + 1];
    if (!(seqae::is_call_frame(schema, p) && seqae::is_call_frame(schema, th))) break;
    current.program = resolve_program(bank, p);
    current.thought.assign(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(bank.shape().thought));
    length = window;
  }
  return out;
}

/// Trains the bank on the continuation chains of `sequences`. Targets are
/// rebuilt from the current bank every round because the called thoughts
/// move as the bank learns.
inline double train_continuation(std::span<const Window> sequences, std::size_t window, ProgramBank& bank,
                                 std::size_t rounds, std::size_t steps_per_round, std::size_t batch_size,
                                 std::mt19937_64& rng) {
  std::vector<TrainingPair> data;
  for (std::size_t r = 0; r < rounds; ++r) {
    data.clear();
    for (const Window& s : sequences) {
      for (auto& step : continuation_steps(s, window, bank)) data.push_back(TrainingPair::reconstruction(step.sequence));
    }
    bank::train(data, bank, steps_per_round, batch_size, rng);
  }
  return bank::mean_min_loss(data, bank);
}

// ---------------------------------------------------------------------------
// explain-away encoding

/// Mean squared value over all channels of a residual window.
inline double residual_loss(std::span<const Frame> residual) {
  double total = 0.0;
  std::size_t n = 0;
  for (const Frame& f : residual) {
    for (double v : f) total += v * v;
    n += f.size();
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

struct ExplainCall {
  ProgramId program = 0;
  Vec thought;
  Window input;    // residual the call was chosen on
  Window decoded;  // what the call subtracts
};

struct ExplainResult {
  std::vector<ExplainCall> calls;
  Window residual;
  std::vector<double> losses;  // residual loss before the first call and after each call
};

/// Greedy explain-away: repeatedly applies the program whose decode, once
/// subtracted, most lowers the residual loss; stops when the best reduction
/// is below eps or after max_calls calls.
inline ExplainResult explain_away_encode(std::span<const Frame> window, const ProgramBank& bank, double eps = 1e-3,
                                         std::size_t max_calls = 8) {
  if (!(eps > 0.0)) throw std::invalid_argument("explain_away_encode: eps must be > 0");
  ExplainResult r;
  r.residual.assign(window.begin(), window.end());
  r.losses.push_back(residual_loss(r.residual));
  while (r.calls.size() < max_calls) {
    std::optional<ExplainCall> best;
    double best_loss = 0.0;
    Window best_residual;
    for (std::size_t j = 0; j < bank.size(); ++j) {
      const auto& ae = bank.autoencoder(static_cast<ProgramId>(j));
      Vec thought = ae.encode(r.residual);
      Window decoded = ae.decode(thought, r.residual.size());
      Window next = r.residual;
      for (std::size_t t = 0; t < next.size(); ++t) {
        for (std::size_t i = 0; i < next[t].size(); ++i) next[t][i] -= decoded[t][i];
      }
      const double loss = residual_loss(next);
      if (!best || loss < best_loss) {
        best = ExplainCall{static_cast<ProgramId>(j), std::move(thought), r.residual, std::move(decoded)};
        best_loss = loss;
        best_residual = std::move(next);
      }
    }
    if (r.losses.back() - best_loss < eps) break;
    r.calls.push_back(std::move(*best));
    r.residual = std::move(best_residual);
    r.losses.push_back(best_loss);
  }
  return r;
}

/// Expert training pairs from the calls the search selects: each call's
/// program learns to reproduce, from the residual it saw, the part of that
/// residual not explained by the later calls (clamped to [0, 1]).
inline std::pair<std::vector<TrainingPair>, std::vector<ProgramId>> attributed_pairs(const ExplainResult& r) {
  std::vector<TrainingPair> pairs;
  std::vector<ProgramId> programs;
  for (std::size_t c = 0; c < r.calls.size(); ++c) {
    Window target = r.calls[c].input;
    for (std::size_t later = c + 1; later < r.calls.size(); ++later) {
      for (std::size_t t = 0; t < target.size(); ++t) {
        for (std::size_t i = 0; i < target[t].size(); ++i) target[t][i] -= r.calls[later].decoded[t][i];
      }
    }
    for (Frame& f : target) {
      for (double& v : f) v = std::clamp(v, 0.0, 1.0);
    }
    pairs.push_back({r.calls[c].input, std::move(target)});
    programs.push_back(r.calls[c].program);
  }
  return {std::move(pairs), std::move(programs)};
}

/// Alternates explain-away search and expert training on the selected calls.
inline void train_experts(std::span<const Window> windows, ProgramBank& bank, std::size_t rounds,
                          std::size_t steps_per_round, std::size_t batch_size, std::mt19937_64& rng,
                          double eps = 1e-3, std::size_t max_calls = 8) {
  for (std::size_t round = 0; round < rounds; ++round) {
    std::vector<TrainingPair> pairs;
    std::vector<ProgramId> programs;
    for (const Window& w : windows) {
      auto [p, ids] = attributed_pairs(explain_away_encode(w, bank, eps, max_calls));
      pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
      programs.insert(programs.end(), ids.begin(), ids.end());
    }
    if (pairs.empty()) return;
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    std::vector<TrainingPair> batch(std::min(batch_size, pairs.size()));
    std::vector<ProgramId> assigned(batch.size());
    for (std::size_t s = 0; s < steps_per_round; ++s) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const std::size_t i = pick(rng);
        batch[b] = pairs[i];
        assigned[b] = programs[i];
      }
      bank::train_step(batch, bank, assigned);
    }
  }
}

}  // namespace ltm::lifelong
