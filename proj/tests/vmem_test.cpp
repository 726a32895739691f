#include <cmath>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "ltm/vmem.hpp"

namespace ltm::vmem {
namespace {

Vec random_key(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec k(kKeyWidth);
  for (double& x : k) x = normal(rng);
  return k;
}

Vec unit_key(std::size_t axis, double scale = 1.0) {
  Vec k(kKeyWidth, 0.0);
  k[axis] = scale;
  return k;
}

std::string serialize(const VectorMemory& m) {
  std::ostringstream os;
  m.save(os);
  return os.str();
}

TEST(VectorMemory, ReadOnEmptyMemoryIsEmpty) {
  VectorMemory m;
  EXPECT_TRUE(m.read(unit_key(0), 5).empty());
  EXPECT_TRUE(m.read_exact(unit_key(0), 5).empty());
}

TEST(VectorMemory, StoredKeyIsNearestAtDistanceZero) {
  VectorMemory m;
  std::mt19937_64 rng(1);
  const Vec k = random_key(rng);
  const RecordId id = m.write(k, ProgramRef{7});
  const auto hits = m.read(k, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].record.id, id);
  EXPECT_EQ(hits[0].distance, 0.0);
  EXPECT_EQ(std::get<ProgramRef>(hits[0].record.value).program, 7u);
}

TEST(VectorMemory, ResultsSortedByDistance) {
  VectorMemory m;
  m.write(unit_key(0, 3.0), ProgramRef{0});
  m.write(unit_key(0, 1.0), ProgramRef{1});
  m.write(unit_key(0, 2.0), ProgramRef{2});
  const auto hits = m.read(unit_key(0, 0.0), 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_DOUBLE_EQ(hits[0].distance, 1.0);
  EXPECT_DOUBLE_EQ(hits[1].distance, 2.0);
  EXPECT_DOUBLE_EQ(hits[2].distance, 3.0);
}

TEST(VectorMemory, KLargerThanCountReturnsAllSorted) {
  VectorMemory m;
  for (int i = 0; i < 5; ++i) m.write(unit_key(0, 5.0 - i), ProgramRef{static_cast<ProgramId>(i)});
  const auto hits = m.read(Vec(kKeyWidth, 0.0), 50);
  ASSERT_EQ(hits.size(), 5u);
  for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_LE(hits[i - 1].distance, hits[i].distance);
}

TEST(VectorMemory, DuplicateKeysTieBreakByLowerId) {
  VectorMemory m;
  const Vec k = unit_key(3);
  const RecordId a = m.write(k, ProgramRef{1});
  const RecordId b = m.write(k, ProgramRef{2});
  const auto hits = m.read_exact(k, 2);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].record.id, a);
  EXPECT_EQ(hits[1].record.id, b);
  EXPECT_EQ(m.size(), 2u);
}

TEST(VectorMemory, RejectsBadKeysWithoutPartialInsert) {
  VectorMemory m;
  EXPECT_THROW(m.write(Vec(10, 0.0), ProgramRef{0}), std::invalid_argument);
  Vec k(kKeyWidth, 0.0);
  k[5] = std::nan("");
  EXPECT_THROW(m.write(k, ProgramRef{0}), std::invalid_argument);
  EXPECT_EQ(m.size(), 0u);
  EXPECT_EQ(m.next_id(), 0u);
  EXPECT_THROW(m.read(Vec(3, 0.0), 1), std::invalid_argument);
  EXPECT_THROW(m.read(unit_key(0), 0), std::invalid_argument);
}

TEST(VectorMemory, RejectsOversizedPayload) {
  IndexParams p;
  p.max_payload_width = 4;
  VectorMemory m(p);
  EXPECT_THROW(m.write(unit_key(0), Episodic{0, Vec(5, 0.0), 0}), std::invalid_argument);
  EXPECT_NO_THROW(m.write(unit_key(0), Episodic{0, Vec(4, 0.0), 0}));
}

TEST(VectorMemory, DeleteIsIdempotentAndHidesRecord) {
  VectorMemory m;
  const RecordId a = m.write(unit_key(0), ProgramRef{0});
  m.write(unit_key(1), ProgramRef{1});
  EXPECT_TRUE(m.erase(a));
  EXPECT_FALSE(m.erase(a));
  EXPECT_FALSE(m.erase(999));
  const auto hits = m.read(unit_key(0), 2);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_NE(hits[0].record.id, a);
}

TEST(VectorMemory, IdsStayUniqueAcrossDeletesAndCompaction) {
  VectorMemory m;
  std::mt19937_64 rng(3);
  std::vector<RecordId> ids;
  for (int i = 0; i < 200; ++i) ids.push_back(m.write(random_key(rng), ProgramRef{0}));
  for (int i = 0; i < 120; ++i) m.erase(ids[i]);
  const RecordId next = m.write(random_key(rng), ProgramRef{0});
  EXPECT_EQ(next, 200u);
  EXPECT_EQ(m.size(), 81u);
  for (int i = 120; i < 200; ++i) EXPECT_TRUE(m.contains(ids[i]));
}

TEST(VectorMemory, KindFilterReturnsOnlyThatKind) {
  VectorMemory m;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) m.write(random_key(rng), Episodic{0, Vec(3, 1.0), static_cast<std::uint64_t>(i)});
  for (int i = 0; i < 5; ++i) m.write(random_key(rng), ProgramRef{static_cast<ProgramId>(i)});
  const auto hits = m.read(random_key(rng), 3, PayloadKind::kProgram);
  ASSERT_EQ(hits.size(), 3u);
  for (const Hit& h : hits) EXPECT_EQ(kind_of(h.record.value), PayloadKind::kProgram);
  EXPECT_TRUE(m.read(random_key(rng), 3, PayloadKind::kConsequent).empty());
}

TEST(VectorMemory, RecallAgainstExactOracle) {
  VectorMemory m;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) m.write(random_key(rng), ProgramRef{0});
  std::size_t hit1 = 0;
  std::size_t hit10 = 0;
  const int queries = 200;
  for (int q = 0; q < queries; ++q) {
    const Vec key = random_key(rng);
    const auto approx = m.read(key, 10);
    const auto exact = m.read_exact(key, 10);
    if (approx[0].record.id == exact[0].record.id) ++hit1;
    for (const Hit& e : exact) {
      for (const Hit& a : approx) {
        if (a.record.id == e.record.id) {
          ++hit10;
          break;
        }
      }
    }
  }
  EXPECT_GE(static_cast<double>(hit1) / queries, 0.95);
  EXPECT_GE(static_cast<double>(hit10) / (10.0 * queries), 0.90);
}

TEST(VectorMemory, EveryStoredKeyIsFound) {
  VectorMemory m;
  std::mt19937_64 rng(13);
  std::vector<std::pair<RecordId, Vec>> stored;
  for (int i = 0; i < 2000; ++i) {
    Vec k = random_key(rng);
    stored.emplace_back(m.write(k, ProgramRef{0}), k);
  }
  for (const auto& [id, k] : stored) {
    const auto hits = m.read(k, 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].record.id, id);
  }
}

TEST(VectorMemory, SaveLoadRoundTripIsBitExact) {
  VectorMemory m;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    const Vec k = random_key(rng);
    switch (i % 3) {
      case 0: m.write(k, Episodic{static_cast<ProgramId>(i % 4), random_key(rng), static_cast<std::uint64_t>(i)}); break;
      case 1: m.write(k, ProgramRef{static_cast<ProgramId>(i)}); break;
      default: m.write(k, Consequent{Vec{1.0, -2.5, 0.125}, 2}); break;
    }
  }
  m.erase(4);
  const std::string bytes = serialize(m);
  std::istringstream is(bytes);
  const VectorMemory loaded = VectorMemory::load(is);
  EXPECT_EQ(serialize(loaded), bytes);
  EXPECT_EQ(loaded.records(), m.records());
  EXPECT_EQ(loaded.next_id(), m.next_id());
  for (int q = 0; q < 20; ++q) {
    const Vec key = random_key(rng);
    const auto a = m.read_exact(key, 5);
    const auto b = loaded.read_exact(key, 5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].record, b[i].record);
      EXPECT_EQ(a[i].distance, b[i].distance);
    }
  }
}

TEST(VectorMemory, LoadRejectsBadMagicAndTruncation) {
  VectorMemory m;
  m.write(unit_key(0), ProgramRef{1});
  std::string bytes = serialize(m);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream is1(bad);
  EXPECT_THROW(VectorMemory::load(is1), io::FormatError);
  std::istringstream is2(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(VectorMemory::load(is2), io::FormatError);
}

TEST(VectorMemory, ConcurrentReadersSeeConsistentResults) {
  VectorMemory m;
  std::mt19937_64 rng(19);
  for (int i = 0; i < 1000; ++i) m.write(random_key(rng), ProgramRef{0});
  const Vec key = random_key(rng);
  const auto expected = m.read(key, 5);
  std::vector<std::thread> readers;
  std::vector<int> ok(4, 0);
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        const auto hits = m.read(key, 5);
        bool same = hits.size() == expected.size();
        for (std::size_t j = 0; same && j < hits.size(); ++j) same = hits[j].record.id == expected[j].record.id;
        ok[t] += same ? 1 : 0;
      }
    });
  }
  for (auto& r : readers) r.join();
  for (int v : ok) EXPECT_EQ(v, 50);
}

}  // namespace
}  // namespace ltm::vmem
