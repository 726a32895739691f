#pragma once

// Content-addressable vector memory. Keys are 64-wide real vectors; a read
// returns the records whose keys are (approximately) nearest under Euclidean
// distance. The approximate index is a hierarchical navigable small-world
// graph; an exact-key table guarantees that a stored key is always found.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "ltm/io/binary.hpp"
#include "ltm/stretcher.hpp"

namespace ltm::vmem {

using RecordId = std::uint64_t;

/// One specific experienced window: which program encoded it, its thought
/// vector and where it occurred in the stream.
struct Episodic {
  ProgramId program = 0;
  Vec thought;
  std::uint64_t position = 0;
  bool operator==(const Episodic&) const = default;
};

/// Semantic entry pointing at a program vector of the bank.
struct ProgramRef {
  ProgramId program = 0;
  bool operator==(const ProgramRef&) const = default;
};

/// Successor of the window whose thought is the key.
struct Consequent {
  Vec next_thought;
  ProgramId next_program = 0;
  bool operator==(const Consequent&) const = default;
};

using Payload = std::variant<Episodic, ProgramRef, Consequent>;

enum class PayloadKind : std::uint8_t { kEpisodic = 1, kProgram = 2, kConsequent = 3 };

inline PayloadKind kind_of(const Payload& p) {
  switch (p.index()) {
    case 0: return PayloadKind::kEpisodic;
    case 1: return PayloadKind::kProgram;
    default: return PayloadKind::kConsequent;
  }
}

inline std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::kEpisodic: return "episodic";
    case PayloadKind::kProgram: return "program";
    case PayloadKind::kConsequent: return "consequent";
  }
  return "?";
}

struct Record {
  RecordId id = 0;
  Vec key;
  Payload value;
  std::uint64_t timestamp = 0;  // logical write counter
  bool operator==(const Record&) const = default;
};

struct Hit {
  Record record;
  double distance = 0.0;
};

struct IndexParams {
  std::size_t max_degree = 16;  // per upper layer; layer 0 allows twice this
  std::size_t ef_construction = 100;
  std::size_t ef_search = 128;
  std::uint64_t seed = 42;
  std::size_t max_payload_width = 4096;
  double compaction_ratio = 0.25;  // rebuild once this fraction of slots is dead
  bool operator==(const IndexParams&) const = default;
};

/// Keys are resized to 64 entries by zero padding or truncation.
inline Vec to_key(std::span<const double> v) {
  Vec k(kKeyWidth, 0.0);
  std::copy_n(v.begin(), std::min(v.size(), kKeyWidth), k.begin());
  return k;
}

namespace detail {

// Four independent partial sums let the compiler keep several lanes busy
// without reassociating; the summation order is fixed.
inline double squared_distance(const double* a, const double* b) {
  static_assert(kKeyWidth % 4 == 0);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t i = 0; i < kKeyWidth; i += 4) {
    const double d0 = a[i] - b[i];
    const double d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2];
    const double d3 = a[i + 3] - b[i + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  return (s0 + s1) + (s2 + s3);
}

struct KeyHash {
  std::size_t operator()(const Vec& v) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (double x : v) {
      h ^= std::bit_cast<std::uint64_t>(x == 0.0 ? 0.0 : x);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

// (squared distance, slot); ordering by distance then record id happens at
// the end, the heaps only need a strict order for determinism.
using Candidate = std::pair<double, std::uint32_t>;

}  // namespace detail

class VectorMemory {
 public:
  explicit VectorMemory(IndexParams params = {}) : params_(params), level_rng_(params.seed) {
    if (params_.max_degree < 2) throw std::invalid_argument("VectorMemory: max_degree must be >= 2");
    if (params_.ef_construction == 0 || params_.ef_search == 0) {
      throw std::invalid_argument("VectorMemory: beam widths must be >= 1");
    }
    level_scale_ = 1.0 / std::log(static_cast<double>(params_.max_degree));
  }

  VectorMemory(const VectorMemory& other) { copy_from(other); }
  VectorMemory& operator=(const VectorMemory& other) {
    if (this != &other) copy_from(other);
    return *this;
  }
  VectorMemory(VectorMemory&& other) noexcept { move_from(std::move(other)); }
  VectorMemory& operator=(VectorMemory&& other) noexcept {
    if (this != &other) move_from(std::move(other));
    return *this;
  }

  const IndexParams& params() const { return params_; }

  /// Sets the query beam; larger values trade speed for recall.
  void set_ef_search(std::size_t ef) {
    if (ef == 0) throw std::invalid_argument("set_ef_search: beam must be >= 1");
    std::unique_lock lock(*mutex_);
    params_.ef_search = ef;
  }

  std::size_t size() const {
    std::shared_lock lock(*mutex_);
    return live_;
  }
  bool empty() const { return size() == 0; }

  std::size_t count(PayloadKind kind) const {
    std::shared_lock lock(*mutex_);
    auto it = kind_counts_.find(kind);
    return it == kind_counts_.end() ? 0 : it->second;
  }

  RecordId next_id() const {
    std::shared_lock lock(*mutex_);
    return next_id_;
  }

  /// Stores a record and returns its id. Validation happens before anything
  /// is modified, so a rejected write leaves the memory unchanged.
  RecordId write(std::span<const double> key, Payload value) {
    validate_key(key);
    validate_payload(value);
    std::unique_lock lock(*mutex_);
    Record r{next_id_, Vec(key.begin(), key.end()), std::move(value), clock_};
    ++next_id_;
    ++clock_;
    insert_record(std::move(r));
    return next_id_ - 1;
  }

  /// Removes a record; false when the id is unknown or already removed.
  bool erase(RecordId id) {
    std::unique_lock lock(*mutex_);
    auto it = slot_of_.find(id);
    if (it == slot_of_.end()) return false;
    const std::uint32_t slot = it->second;
    Node& n = nodes_[slot];
    n.dead = true;
    slot_of_.erase(it);
    auto& same = exact_[n.record.key];
    std::erase(same, slot);
    if (same.empty()) exact_.erase(n.record.key);
    --kind_counts_[kind_of(n.record.value)];
    --live_;
    ++dead_;
    if (static_cast<double>(dead_) > params_.compaction_ratio * static_cast<double>(nodes_.size())) rebuild();
    return true;
  }

  std::optional<Record> get(RecordId id) const {
    std::shared_lock lock(*mutex_);
    auto it = slot_of_.find(id);
    if (it == slot_of_.end()) return std::nullopt;
    return nodes_[it->second].record;
  }

  bool contains(RecordId id) const {
    std::shared_lock lock(*mutex_);
    return slot_of_.contains(id);
  }

  /// Live records in ascending id order.
  std::vector<Record> records() const {
    std::shared_lock lock(*mutex_);
    std::vector<Record> out;
    out.reserve(live_);
    for (const auto& [id, slot] : slot_of_) out.push_back(nodes_[slot].record);
    return out;
  }

  /// Approximate k nearest records, nearest first (ties by lower id). Records
  /// whose key equals the query exactly are always included.
  std::vector<Hit> read(std::span<const double> key, std::size_t k,
                        std::optional<PayloadKind> kind = std::nullopt) const {
    if (k == 0) throw std::invalid_argument("read: k must be >= 1");
    validate_key(key);
    std::shared_lock lock(*mutex_);
    const std::size_t eligible = kind ? count_locked(*kind) : live_;
    if (eligible == 0) return {};
    // small or heavily filtered populations are scanned exactly
    if (k >= eligible || eligible <= params_.ef_search) return exact_locked(key, k, kind);

    std::vector<detail::Candidate> found = search_locked(key.data(), std::max(params_.ef_search, k), kind);
    if (kind && found.size() < k) return exact_locked(key, k, kind);

    auto hit = exact_.find(Vec(key.begin(), key.end()));
    if (hit != exact_.end()) {
      for (std::uint32_t slot : hit->second) {
        if (!kind || kind_of(nodes_[slot].record.value) == *kind) found.emplace_back(0.0, slot);
      }
    }
    return finish(found, k);
  }

  /// Brute-force k nearest records; ground truth for read.
  std::vector<Hit> read_exact(std::span<const double> key, std::size_t k,
                              std::optional<PayloadKind> kind = std::nullopt) const {
    if (k == 0) throw std::invalid_argument("read_exact: k must be >= 1");
    validate_key(key);
    std::shared_lock lock(*mutex_);
    return exact_locked(key, k, kind);
  }

  // -------------------------------------------------------------------------
  // persistence

  static constexpr char kMagic[4] = {'V', 'M', 'E', 'M'};
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::uint8_t kEuclidean = 0;

  /// Layout: "VMEM", u16 version, u8 metric, u32 max degree, u32
  /// construction beam, u32 query beam, u64 index seed, u64 next id, u64
  /// clock, u64 record count, then per record u64 id, 64 x f64 key, u8
  /// payload tag, payload, u64 timestamp.
  void save(std::ostream& os) const {
    std::shared_lock lock(*mutex_);
    io::Writer w(os);
    w.magic(kMagic);
    w.u16(kVersion);
    w.u8(kEuclidean);
    w.u32(static_cast<std::uint32_t>(params_.max_degree));
    w.u32(static_cast<std::uint32_t>(params_.ef_construction));
    w.u32(static_cast<std::uint32_t>(params_.ef_search));
    w.u64(params_.seed);
    w.u64(next_id_);
    w.u64(clock_);
    w.u64(live_);
    for (const auto& [id, slot] : slot_of_) {
      const Record& r = nodes_[slot].record;
      w.u64(r.id);
      for (double x : r.key) w.f64(x);
      w.u8(static_cast<std::uint8_t>(kind_of(r.value)));
      std::visit(
          [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Episodic>) {
              w.u32(p.program);
              w.f64s(p.thought);
              w.u64(p.position);
            } else if constexpr (std::is_same_v<T, ProgramRef>) {
              w.u32(p.program);
            } else {
              w.f64s(p.next_thought);
              w.u32(p.next_program);
            }
          },
          r.value);
      w.u64(r.timestamp);
    }
    w.finish();
  }

  static VectorMemory load(std::istream& is) {
    io::Reader r(is);
    r.expect_magic(kMagic, "memory");
    const std::uint16_t version = r.u16();
    if (version != kVersion) throw io::FormatError("memory: unsupported version " + std::to_string(version));
    const std::uint8_t metric = r.u8();
    if (metric != kEuclidean) throw io::FormatError("memory: unknown metric tag " + std::to_string(metric));
    IndexParams params;
    params.max_degree = r.u32();
    params.ef_construction = r.u32();
    params.ef_search = r.u32();
    params.seed = r.u64();
    if (params.max_degree < 2 || params.ef_construction == 0 || params.ef_search == 0) {
      throw io::FormatError("memory: invalid index parameters");
    }
    VectorMemory m(params);
    const std::uint64_t next_id = r.u64();
    const std::uint64_t clock = r.u64();
    const std::uint64_t count = r.u64();
    // smallest possible record: id, key, tag, program id, timestamp
    r.require_remaining(count * (8 + 8 * kKeyWidth + 1 + 4 + 8), "memory records");
    RecordId previous = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      Record rec;
      rec.id = r.u64();
      if ((i > 0 && rec.id <= previous) || rec.id >= next_id) {
        throw io::FormatError("memory: record ids out of order at record " + std::to_string(i));
      }
      previous = rec.id;
      rec.key.resize(kKeyWidth);
      for (double& x : rec.key) x = r.f64();
      const auto tag = static_cast<PayloadKind>(r.u8());
      switch (tag) {
        case PayloadKind::kEpisodic: {
          Episodic e;
          e.program = r.u32();
          e.thought = r.f64s();
          e.position = r.u64();
          rec.value = std::move(e);
          break;
        }
        case PayloadKind::kProgram: rec.value = ProgramRef{r.u32()}; break;
        case PayloadKind::kConsequent: {
          Consequent c;
          c.next_thought = r.f64s();
          c.next_program = r.u32();
          rec.value = std::move(c);
          break;
        }
        default: throw io::FormatError("memory: unknown payload tag " + std::to_string(static_cast<int>(tag)));
      }
      rec.timestamp = r.u64();
      m.insert_record(std::move(rec));
    }
    m.next_id_ = next_id;
    m.clock_ = clock;
    return m;
  }

  void save_file(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("memory: cannot open " + path.string());
    save(os);
  }

  static VectorMemory load_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("memory: cannot open " + path.string());
    return load(is);
  }

 private:
  struct Node {
    Record record;
    std::vector<std::vector<std::uint32_t>> links;  // per layer
    bool dead = false;
  };

  void copy_from(const VectorMemory& other) {
    std::shared_lock lock(*other.mutex_);
    params_ = other.params_;
    level_rng_ = other.level_rng_;
    level_scale_ = other.level_scale_;
    nodes_ = other.nodes_;
    slot_of_ = other.slot_of_;
    exact_ = other.exact_;
    kind_counts_ = other.kind_counts_;
    entry_ = other.entry_;
    max_level_ = other.max_level_;
    live_ = other.live_;
    dead_ = other.dead_;
    next_id_ = other.next_id_;
    clock_ = other.clock_;
  }

  void move_from(VectorMemory&& other) {
    std::unique_lock lock(*other.mutex_);
    params_ = other.params_;
    level_rng_ = other.level_rng_;
    level_scale_ = other.level_scale_;
    nodes_ = std::move(other.nodes_);
    slot_of_ = std::move(other.slot_of_);
    exact_ = std::move(other.exact_);
    kind_counts_ = std::move(other.kind_counts_);
    entry_ = other.entry_;
    max_level_ = other.max_level_;
    live_ = other.live_;
    dead_ = other.dead_;
    next_id_ = other.next_id_;
    clock_ = other.clock_;
    other.live_ = other.dead_ = 0;
    other.entry_.reset();
  }

  static void validate_key(std::span<const double> key) {
    if (key.size() != kKeyWidth) {
      throw std::invalid_argument("memory: key must have 64 elements, got " + std::to_string(key.size()));
    }
    for (double x : key) {
      if (!std::isfinite(x)) throw std::invalid_argument("memory: key contains a non-finite value");
    }
  }

  void validate_payload(const Payload& value) const {
    const std::size_t width = std::visit(
        [](const auto& p) -> std::size_t {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Episodic>) return p.thought.size();
          else if constexpr (std::is_same_v<T, Consequent>) return p.next_thought.size();
          else return 0;
        },
        value);
    if (width > params_.max_payload_width) {
      throw std::invalid_argument("memory: payload width " + std::to_string(width) + " exceeds limit " +
                                  std::to_string(params_.max_payload_width));
    }
  }

  std::size_t count_locked(PayloadKind kind) const {
    auto it = kind_counts_.find(kind);
    return it == kind_counts_.end() ? 0 : it->second;
  }

  double dist(std::uint32_t slot, const double* q) const {
    return detail::squared_distance(nodes_[slot].record.key.data(), q);
  }
  double dist(std::uint32_t a, std::uint32_t b) const {
    return detail::squared_distance(nodes_[a].record.key.data(), nodes_[b].record.key.data());
  }

  std::size_t degree_limit(std::size_t layer) const {
    return layer == 0 ? 2 * params_.max_degree : params_.max_degree;
  }

  int draw_level() {
    std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
    return static_cast<int>(std::floor(-std::log(u(level_rng_)) * level_scale_));
  }

  void insert_record(Record r) {
    const auto slot = static_cast<std::uint32_t>(nodes_.size());
    slot_of_[r.id] = slot;
    exact_[r.key].push_back(slot);
    ++kind_counts_[kind_of(r.value)];
    ++live_;
    const int level = draw_level();
    nodes_.push_back(Node{std::move(r), std::vector<std::vector<std::uint32_t>>(level + 1), false});
    link(slot, level);
  }

  void link(std::uint32_t slot, int level) {
    if (!entry_) {
      entry_ = slot;
      max_level_ = level;
      return;
    }
    const double* q = nodes_[slot].record.key.data();
    std::uint32_t ep = *entry_;
    for (int layer = max_level_; layer > level; --layer) ep = greedy(q, ep, layer);
    for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
      auto candidates = search_layer(q, {ep}, params_.ef_construction, layer);
      auto chosen = select_neighbors(q, candidates, params_.max_degree);
      nodes_[slot].links[layer] = chosen;
      for (std::uint32_t other : chosen) {
        auto& back = nodes_[other].links[layer];
        back.push_back(slot);
        if (back.size() > degree_limit(layer)) prune(other, layer);
      }
      ep = candidates.front().second;
    }
    if (level > max_level_) {
      max_level_ = level;
      entry_ = slot;
    }
  }

  void prune(std::uint32_t slot, std::size_t layer) {
    const double* q = nodes_[slot].record.key.data();
    std::vector<detail::Candidate> c;
    for (std::uint32_t o : nodes_[slot].links[layer]) c.emplace_back(dist(o, q), o);
    std::sort(c.begin(), c.end());
    nodes_[slot].links[layer] = select_neighbors(q, c, degree_limit(layer));
  }

  // Diversity heuristic: keep a candidate only if it is closer to the query
  // than to every neighbor kept so far; fill up with the nearest leftovers.
  std::vector<std::uint32_t> select_neighbors(const double*, const std::vector<detail::Candidate>& sorted,
                                              std::size_t m) const {
    std::vector<std::uint32_t> kept;
    std::vector<std::uint32_t> skipped;
    for (const auto& [d, s] : sorted) {
      if (kept.size() >= m) break;
      bool good = true;
      for (std::uint32_t k : kept) {
        if (dist(s, k) < d) {
          good = false;
          break;
        }
      }
      if (good) kept.push_back(s);
      else skipped.push_back(s);
    }
    for (std::size_t i = 0; i < skipped.size() && kept.size() < m; ++i) kept.push_back(skipped[i]);
    return kept;
  }

  std::uint32_t greedy(const double* q, std::uint32_t ep, int layer) const {
    double best = dist(ep, q);
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::uint32_t o : nodes_[ep].links[layer]) {
        const double d = dist(o, q);
        if (d < best || (d == best && o < ep)) {
          best = d;
          ep = o;
          moved = true;
        }
      }
    }
    return ep;
  }

  // Beam search on one layer; returns candidates sorted nearest first.
  // Dead nodes are traversed but still returned; callers filter.
  std::vector<detail::Candidate> search_layer(const double* q, std::vector<std::uint32_t> entries, std::size_t ef,
                                              int layer) const {
    thread_local std::vector<std::uint32_t> marks;
    thread_local std::uint32_t epoch = 0;
    if (marks.size() < nodes_.size()) marks.resize(nodes_.size(), 0);
    if (++epoch == 0) {
      std::fill(marks.begin(), marks.end(), 0);
      epoch = 1;
    }
    std::priority_queue<detail::Candidate, std::vector<detail::Candidate>, std::greater<>> frontier;
    std::priority_queue<detail::Candidate> best;
    for (std::uint32_t e : entries) {
      marks[e] = epoch;
      const double d = dist(e, q);
      frontier.emplace(d, e);
      best.emplace(d, e);
    }
    while (!frontier.empty()) {
      const auto [d, s] = frontier.top();
      if (best.size() >= ef && d > best.top().first) break;
      frontier.pop();
      for (std::uint32_t o : nodes_[s].links[layer]) {
        if (marks[o] == epoch) continue;
        marks[o] = epoch;
        const double od = dist(o, q);
        if (best.size() < ef || od < best.top().first) {
          frontier.emplace(od, o);
          best.emplace(od, o);
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<detail::Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  std::vector<detail::Candidate> search_locked(const double* q, std::size_t ef,
                                               std::optional<PayloadKind> kind) const {
    std::uint32_t ep = *entry_;
    for (int layer = max_level_; layer > 0; --layer) ep = greedy(q, ep, layer);
    // filtered reads widen the beam in proportion to how rare the kind is
    std::size_t beam = ef;
    if (kind) {
      const double share = static_cast<double>(count_locked(*kind)) / static_cast<double>(nodes_.size());
      beam = static_cast<std::size_t>(std::ceil(static_cast<double>(ef) / std::max(share, 1e-3)));
      beam = std::min(beam, nodes_.size());
    } else if (dead_ > 0) {
      beam = std::min(nodes_.size(), ef + ef * dead_ / std::max<std::size_t>(live_, 1));
    }
    auto found = search_layer(q, {ep}, beam, 0);
    std::erase_if(found, [&](const detail::Candidate& c) {
      const Node& n = nodes_[c.second];
      return n.dead || (kind && kind_of(n.record.value) != *kind);
    });
    return found;
  }

  std::vector<Hit> finish(std::vector<detail::Candidate>& found, std::size_t k) const {
    std::sort(found.begin(), found.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return nodes_[a.second].record.id < nodes_[b.second].record.id;
    });
    found.erase(std::unique(found.begin(), found.end(),
                            [](const auto& a, const auto& b) { return a.second == b.second; }),
                found.end());
    std::vector<Hit> out;
    for (std::size_t i = 0; i < found.size() && out.size() < k; ++i) {
      out.push_back(Hit{nodes_[found[i].second].record, std::sqrt(found[i].first)});
    }
    return out;
  }

  std::vector<Hit> exact_locked(std::span<const double> key, std::size_t k, std::optional<PayloadKind> kind) const {
    std::vector<detail::Candidate> all;
    all.reserve(live_);
    for (const auto& [id, slot] : slot_of_) {
      if (kind && kind_of(nodes_[slot].record.value) != *kind) continue;
      all.emplace_back(dist(slot, key.data()), slot);
    }
    const std::size_t keep = std::min(k, all.size());
    auto less = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return nodes_[a.second].record.id < nodes_[b.second].record.id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), less);
    all.resize(keep);
    return finish(all, k);
  }

  // Drops dead slots and relinks the live records in id order.
  void rebuild() {
    std::vector<Node> old = std::move(nodes_);
    nodes_.clear();
    slot_of_.clear();
    exact_.clear();
    kind_counts_.clear();
    entry_.reset();
    max_level_ = 0;
    live_ = 0;
    dead_ = 0;
    std::sort(old.begin(), old.end(), [](const Node& a, const Node& b) { return a.record.id < b.record.id; });
    for (Node& n : old) {
      if (!n.dead) insert_record(std::move(n.record));
    }
  }

  IndexParams params_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
  std::mt19937_64 level_rng_;
  double level_scale_ = 1.0;
  std::vector<Node> nodes_;
  std::map<RecordId, std::uint32_t> slot_of_;
  std::unordered_map<Vec, std::vector<std::uint32_t>, detail::KeyHash> exact_;
  std::map<PayloadKind, std::size_t> kind_counts_;
  std::optional<std::uint32_t> entry_;
  int max_level_ = 0;
  std::size_t live_ = 0;
  std::size_t dead_ = 0;
  RecordId next_id_ = 0;
  std::uint64_t clock_ = 0;
};

}  // namespace ltm::vmem
