#pragma once

// Synthetic RAM-trace-like streams: a few deterministic bit-pattern domains,
// composed into one stream with no marker at domain switches. Labels are
// produced on a separate track for evaluation only.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltm/io/binary.hpp"
#include "ltm/seqae.hpp"

namespace ltm::datagen {

enum class GeneratorKind { kCounter, kShiftRegister, kPeriodic, kMarkovBits };

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::kCounter: return "counter";
    case GeneratorKind::kShiftRegister: return "shift_register";
    case GeneratorKind::kPeriodic: return "periodic";
    case GeneratorKind::kMarkovBits: return "markov_bits";
  }
  return "?";
}

inline GeneratorKind parse_kind(const std::string& s) {
  if (s == "counter") return GeneratorKind::kCounter;
  if (s == "shift_register") return GeneratorKind::kShiftRegister;
  if (s == "periodic") return GeneratorKind::kPeriodic;
  if (s == "markov_bits") return GeneratorKind::kMarkovBits;
  throw std::invalid_argument("unknown generator kind '" + s + "'");
}

struct DomainSpec {
  std::string name;
  GeneratorKind kind = GeneratorKind::kCounter;
  std::size_t bit_offset = 0;
  std::size_t bit_span = 8;
  std::size_t period = 4;       // periodic
  std::int64_t start = -1;      // counter start; < 0 draws it from the seed
  std::uint64_t pattern_seed = 0;  // fixed per domain: register contents, periodic rows, flip rates
  std::uint64_t feedback_taps = 0;  // shift_register: 0 rotates a fixed pattern
  double max_flip = 0.2;        // markov_bits
  // constant bits drawn once from pattern_seed, like static memory of a program
  std::size_t background_offset = 0;
  std::size_t background_span = 0;
  std::size_t bits = 32;        // bit channels in a frame
  std::size_t actions = 0;      // trailing one-hot action channels

  std::size_t width() const { return bits + actions; }
};

/// Emits `count` frames. The domain's own structure (shift register
/// contents, periodic rows, flip rates) comes from pattern_seed; `seed` only
/// picks the starting state or phase. Channels outside the bit span stay 0;
/// when action channels exist a seeded one-hot action is appended.
inline std::vector<Frame> generate(const DomainSpec& spec, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("generate: count must be >= 1");
  if (spec.bit_span == 0 || spec.bit_offset + spec.bit_span > spec.bits) {
    throw std::invalid_argument("generate: bit span [" + std::to_string(spec.bit_offset) + ", " +
                                std::to_string(spec.bit_offset + spec.bit_span) + ") exceeds " +
                                std::to_string(spec.bits) + " bit channels");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  const std::size_t span = spec.bit_span;
  std::vector<Frame> out(count, Frame(spec.width(), 0.0));

  switch (spec.kind) {
    case GeneratorKind::kCounter: {
      const std::uint64_t modulus = span >= 63 ? 0 : (std::uint64_t{1} << span);
      std::uint64_t value = spec.start >= 0 ? static_cast<std::uint64_t>(spec.start) : rng();
      for (std::size_t t = 0; t < count; ++t) {
        const std::uint64_t v = modulus == 0 ? value + t : (value + t) % modulus;
        for (std::size_t b = 0; b < span; ++b) out[t][spec.bit_offset + b] = static_cast<double>((v >> b) & 1U);
      }
      break;
    }
    case GeneratorKind::kShiftRegister: {
      std::vector<int> reg(span, 0);
      if (spec.feedback_taps != 0) {
        // linear feedback: the bit shifted in is the parity of the tapped cells
        while (std::count(reg.begin(), reg.end(), 1) == 0) {
          for (int& b : reg) b = coin(rng) ? 1 : 0;
        }
        for (std::size_t t = 0; t < count; ++t) {
          for (std::size_t b = 0; b < span; ++b) out[t][spec.bit_offset + b] = reg[b];
          int in = 0;
          for (std::size_t b = 0; b < span && b < 64; ++b) {
            if ((spec.feedback_taps >> b) & 1U) in ^= reg[b];
          }
          std::rotate(reg.rbegin(), reg.rbegin() + 1, reg.rend());
          reg[0] = in;
        }
        break;
      }
      std::mt19937_64 pattern_rng(spec.pattern_seed);
      while (std::count(reg.begin(), reg.end(), 1) == 0 || std::count(reg.begin(), reg.end(), 1) == static_cast<long>(span)) {
        for (int& b : reg) b = coin(pattern_rng) ? 1 : 0;
        if (span == 1) break;
      }
      const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, span - 1)(rng);
      std::rotate(reg.rbegin(), reg.rbegin() + static_cast<std::ptrdiff_t>(offset), reg.rend());
      for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t b = 0; b < span; ++b) out[t][spec.bit_offset + b] = reg[b];
        std::rotate(reg.rbegin(), reg.rbegin() + 1, reg.rend());
      }
      break;
    }
    case GeneratorKind::kPeriodic: {
      if (spec.period == 0) throw std::invalid_argument("generate: period must be >= 1");
      std::mt19937_64 pattern_rng(spec.pattern_seed);
      std::vector<std::vector<int>> pattern(spec.period, std::vector<int>(span));
      for (auto& row : pattern) {
        for (int& b : row) b = coin(pattern_rng) ? 1 : 0;
      }
      const std::size_t phase = std::uniform_int_distribution<std::size_t>(0, spec.period - 1)(rng);
      for (std::size_t t = 0; t < count; ++t) {
        const auto& row = pattern[(t + phase) % spec.period];
        for (std::size_t b = 0; b < span; ++b) out[t][spec.bit_offset + b] = row[b];
      }
      break;
    }
    case GeneratorKind::kMarkovBits: {
      std::mt19937_64 transitions(spec.pattern_seed);
      std::uniform_real_distribution<double> prob(0.0, spec.max_flip);
      std::vector<double> flip(span);
      for (double& p : flip) p = prob(transitions);
      std::vector<int> state(span);
      for (int& b : state) b = coin(rng) ? 1 : 0;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t b = 0; b < span; ++b) out[t][spec.bit_offset + b] = state[b];
        for (std::size_t b = 0; b < span; ++b) {
          if (u(rng) < flip[b]) state[b] ^= 1;
        }
      }
      break;
    }
  }
  if (spec.background_span > 0) {
    if (spec.background_offset + spec.background_span > spec.bits) {
      throw std::invalid_argument("generate: background exceeds the bit channels");
    }
    std::mt19937_64 pattern_rng(spec.pattern_seed ^ 0x5bd1e995ULL);
    Vec background(spec.background_span);
    for (double& b : background) b = coin(pattern_rng) ? 1.0 : 0.0;
    for (auto& f : out) {
      for (std::size_t b = 0; b < spec.background_span; ++b) {
        const std::size_t c = spec.background_offset + b;
        if (c < spec.bit_offset || c >= spec.bit_offset + span) f[c] = background[b];
      }
    }
  }
  if (spec.actions > 0) {
    std::uniform_int_distribution<std::size_t> act(0, spec.actions - 1);
    for (auto& f : out) f[spec.bits + act(rng)] = 1.0;
  }
  return out;
}

struct Episode {
  std::string domain;
  std::size_t frames = 0;
  std::uint64_t seed = 0;
};

struct StreamScript {
  std::vector<DomainSpec> domains;
  std::vector<Episode> episodes;

  const DomainSpec& domain(const std::string& name) const {
    for (const DomainSpec& d : domains) {
      if (d.name == name) return d;
    }
    throw std::invalid_argument("StreamScript: unknown domain '" + name + "'");
  }
};

/// Frames plus a label track. The label track never enters the learner.
struct LabeledStream {
  std::vector<Frame> frames;
  std::vector<std::string> labels;
};

inline LabeledStream compose(const StreamScript& script) {
  if (script.episodes.empty()) throw std::invalid_argument("compose: script has no episodes");
  std::size_t width = 0;
  LabeledStream out;
  for (const Episode& e : script.episodes) {
    const DomainSpec& spec = script.domain(e.domain);
    if (width == 0) width = spec.width();
    if (spec.width() != width) throw std::invalid_argument("compose: domains disagree on frame width");
    auto frames = generate(spec, e.frames, e.seed);
    out.frames.insert(out.frames.end(), std::make_move_iterator(frames.begin()),
                      std::make_move_iterator(frames.end()));
    out.labels.insert(out.labels.end(), e.frames, e.domain);
  }
  return out;
}

/// Feedback masks giving long register periods, indexed by register width.
inline std::uint64_t default_taps(std::size_t span) {
  static constexpr std::uint64_t kTaps[17] = {0,     0,     0x3,   0x6,    0xC,    0x14,   0x30,   0x60,  0xB8,
                                              0x110, 0x240, 0x500, 0xE08, 0x1C80, 0x3802, 0x6000, 0xB400};
  return span < 17 ? kTaps[span] : 0;
}

/// Three domains writing to the same low channels, the way different
/// programs reuse the same memory addresses: a counter on bits 0-7, a
/// rotating shift register on bits 0-15 and a period-24 pattern on bits 0-15.
/// Every other bit holds a constant per-domain background.
inline std::vector<DomainSpec> default_domains(std::size_t bits = 32, std::size_t actions = 0) {
  if (bits < 2) throw std::invalid_argument("default_domains: need at least 2 bit channels");
  const std::size_t wide = std::min<std::size_t>(16, bits);
  std::vector<DomainSpec> d(3);
  d[0].name = "counter";
  d[0].kind = GeneratorKind::kCounter;
  d[0].bit_span = std::min<std::size_t>(8, bits);
  d[1].name = "shift_register";
  d[1].kind = GeneratorKind::kShiftRegister;
  d[1].bit_span = wide;
  d[2].name = "periodic";
  d[2].kind = GeneratorKind::kPeriodic;
  d[2].bit_span = wide;
  d[2].period = 24;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto& s = d[i];
    s.pattern_seed = 1000 + i;
    s.bit_offset = 0;
    s.background_offset = 0;
    s.background_span = bits;
    s.bits = bits;
    s.actions = actions;
  }
  return d;
}

/// Round-robin episodes over the default domains.
inline StreamScript default_script(std::size_t frames_per_episode = 700, std::size_t rounds = 3,
                                   std::uint64_t seed = 1, std::size_t bits = 32) {
  StreamScript script;
  script.domains = default_domains(bits);
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t d = 0; d < script.domains.size(); ++d) {
      script.episodes.push_back(Episode{script.domains[d].name, frames_per_episode, seed * 7919 + r * 31 + d});
    }
  }
  return script;
}

// ---------------------------------------------------------------------------
// LTMT trace files

inline constexpr char kTraceMagic[4] = {'L', 'T', 'M', 'T'};
inline constexpr std::uint16_t kTraceVersion = 1;

enum class TraceEncoding : std::uint8_t { kFloat64 = 0, kBitPacked = 1 };

/// Layout: "LTMT", u16 version, u32 width, u64 frames, u8 encoding, payload.
/// kFloat64 payload: frames x width float64, row-major. kBitPacked payload:
/// u32 action channel count, then per frame ceil(bits / 8) bytes of bits
/// (LSB first) followed by the action channels as float64.
inline void write_trace(std::ostream& os, std::span<const Frame> frames, std::size_t width,
                        TraceEncoding encoding = TraceEncoding::kFloat64, std::size_t actions = 0) {
  io::Writer w(os);
  w.magic(kTraceMagic);
  w.u16(kTraceVersion);
  w.u32(static_cast<std::uint32_t>(width));
  w.u64(frames.size());
  w.u8(static_cast<std::uint8_t>(encoding));
  if (encoding == TraceEncoding::kBitPacked) {
    if (actions > width) throw std::invalid_argument("write_trace: more action channels than width");
    w.u32(static_cast<std::uint32_t>(actions));
  }
  const std::size_t bits = width - actions;
  for (const Frame& f : frames) {
    if (f.size() != width) throw std::invalid_argument("write_trace: frame width mismatch");
    if (encoding == TraceEncoding::kFloat64) {
      for (double v : f) w.f64(v);
    } else {
      std::vector<std::uint8_t> packed((bits + 7) / 8, 0);
      for (std::size_t b = 0; b < bits; ++b) {
        if (f[b] != 0.0 && f[b] != 1.0) throw std::invalid_argument("write_trace: bit channel not in {0,1}");
        if (f[b] == 1.0) packed[b / 8] |= static_cast<std::uint8_t>(1U << (b % 8));
      }
      w.bytes(packed);
      for (std::size_t a = bits; a < width; ++a) w.f64(f[a]);
    }
  }
  w.finish();
}

struct Trace {
  std::size_t width = 0;
  std::vector<Frame> frames;
};

inline Trace read_trace(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kTraceMagic, "trace");
  const std::uint16_t version = r.u16();
  if (version != kTraceVersion) {
    throw io::FormatError("trace: unsupported version " + std::to_string(version));
  }
  Trace t;
  t.width = r.u32();
  const std::uint64_t count = r.u64();
  const auto encoding = static_cast<TraceEncoding>(r.u8());
  std::size_t actions = 0;
  std::uint64_t per_frame = 0;
  if (encoding == TraceEncoding::kFloat64) {
    per_frame = 8ULL * t.width;
  } else if (encoding == TraceEncoding::kBitPacked) {
    actions = r.u32();
    if (actions > t.width) throw io::FormatError("trace: action channels exceed width");
    per_frame = (t.width - actions + 7) / 8 + 8ULL * actions;
  } else {
    throw io::FormatError("trace: unknown encoding byte " + std::to_string(static_cast<int>(encoding)));
  }
  r.require_remaining(count * per_frame, "trace payload");
  const std::size_t bits = t.width - actions;
  t.frames.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Frame f(t.width);
    if (encoding == TraceEncoding::kFloat64) {
      for (double& v : f) v = r.f64();
    } else {
      const auto packed = r.bytes((bits + 7) / 8);
      for (std::size_t b = 0; b < bits; ++b) f[b] = (packed[b / 8] >> (b % 8)) & 1U;
      for (std::size_t a = bits; a < t.width; ++a) f[a] = r.f64();
    }
    t.frames.push_back(std::move(f));
  }
  return t;
}

inline void save_trace(std::span<const Frame> frames, const std::filesystem::path& path,
                       TraceEncoding encoding = TraceEncoding::kFloat64, std::size_t actions = 0) {
  if (frames.empty()) throw std::invalid_argument("save_trace: empty stream");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_trace: cannot open " + path.string());
  write_trace(os, frames, frames.front().size(), encoding, actions);
}

inline Trace load_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_trace: cannot open " + path.string());
  return read_trace(is);
}

/// One label per line, aligned with frames.
inline void save_labels(std::span<const std::string> labels, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_labels: cannot open " + path.string());
  for (const auto& l : labels) os << l << '\n';
}

inline std::vector<std::string> load_labels(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_labels: cannot open " + path.string());
  std::vector<std::string> labels;
  for (std::string line; std::getline(is, line);) labels.push_back(line);
  return labels;
}

}  // namespace ltm::datagen
