#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "ltm/bank.hpp"
#include "ltm/datagen.hpp"

namespace ltm::bank {
namespace {

const ModelShape kShape{seqae::FrameSchema{8, 0, false}, 8, 8};

std::vector<TrainingPair> counter_windows(std::size_t n, std::size_t length = 4, std::uint64_t seed = 1) {
  datagen::DomainSpec spec;
  spec.kind = datagen::GeneratorKind::kCounter;
  spec.bits = 8;
  spec.bit_span = 8;
  const auto frames = datagen::generate(spec, n * length, seed);
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(TrainingPair::reconstruction(
        Window(frames.begin() + static_cast<std::ptrdiff_t>(i * length),
               frames.begin() + static_cast<std::ptrdiff_t>((i + 1) * length))));
  }
  return out;
}

double correlation(const Vec& a, const Vec& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (a[i] - ma) * (b[i] - mb);
    aa += (a[i] - ma) * (a[i] - ma);
    bb += (b[i] - mb) * (b[i] - mb);
  }
  return ab / std::sqrt(aa * bb);
}

TEST(ProgramBank, CreateGivesIdsKeysAndMatchingStretcher) {
  const auto bank = ProgramBank::create(kShape, 3, 1);
  ASSERT_EQ(bank.size(), 3U);
  for (ProgramId id = 0; id < 3; ++id) {
    EXPECT_EQ(bank.program(id).id, id);
    ASSERT_TRUE(bank.program(id).key.has_value());
    EXPECT_EQ(bank.program(id).key->size(), kKeyWidth);
  }
  EXPECT_EQ(bank.stretcher().output_size, bank.layout().total);
}

TEST(ProgramBank, CorrelatedInitialization) {
  const auto bank = ProgramBank::create(kShape, 24, 2, stretcher::kDefaultDensity, {}, 0.8);
  double total = 0.0;
  std::size_t pairs = 0;
  for (ProgramId i = 0; i < bank.size(); ++i) {
    for (ProgramId j = i + 1; j < bank.size(); ++j) {
      total += correlation(bank.program(i).embedding, bank.program(j).embedding);
      ++pairs;
    }
  }
  EXPECT_NEAR(total / static_cast<double>(pairs), 0.8, 0.1);
  const auto independent = ProgramBank::create(kShape, 24, 2);
  total = 0.0;
  for (ProgramId i = 1; i < independent.size(); ++i) {
    total += correlation(independent.program(0).embedding, independent.program(i).embedding);
  }
  EXPECT_NEAR(total / 23.0, 0.0, 0.1);
  EXPECT_THROW(ProgramBank::create(kShape, 2, 1, 0.01, {}, 1.0), std::invalid_argument);
}

TEST(ProgramBank, ConstructorValidates) {
  const auto sp = stretcher::init_stretcher(1, seqae::param_layout(kShape).total);
  EXPECT_THROW(ProgramBank(kShape, sp, {}), std::invalid_argument);
  EXPECT_THROW(ProgramBank(kShape, sp, {stretcher::sample_program(1, 1)}), std::invalid_argument);
  EXPECT_THROW(ProgramBank(kShape, stretcher::init_stretcher(1, 10), {stretcher::sample_program(1)}),
               std::invalid_argument);
}

TEST(Route, TiesGoToLowestId) {
  auto bank = ProgramBank::create(kShape, 1, 3);
  bank.add_program(bank.program(0).embedding);
  bank.add_program(bank.program(0).embedding);
  const auto data = counter_windows(1);
  const auto r = route(data[0].input, bank);
  EXPECT_EQ(r.losses[0], r.losses[1]);
  EXPECT_EQ(r.losses[1], r.losses[2]);
  EXPECT_EQ(r.argmin, 0U);
  const std::vector<ProgramId> candidates = {2, 1};
  EXPECT_EQ(route_candidates(data[0].input, bank, candidates).argmin, 1U);
}

TEST(Route, ArgminMatchesLossVector) {
  const auto bank = ProgramBank::create(kShape, 4, 5, 0.05);
  for (const auto& p : counter_windows(8)) {
    const auto r = route(p.input, bank);
    for (double l : r.losses) EXPECT_LE(r.min_loss, l);
    EXPECT_EQ(r.losses[r.argmin], r.min_loss);
  }
}

TEST(TrainStep, OnlyTheArgminProgramMoves) {
  auto bank = ProgramBank::create(kShape, 3, 7, 0.05);
  const auto data = counter_windows(1);
  const ProgramId winner = route(data[0].input, bank).argmin;
  const auto before = bank.programs();
  const auto metrics = train_step(data, bank);
  EXPECT_EQ(metrics.usage[winner], 1U);
  for (ProgramId id = 0; id < 3; ++id) {
    if (id == winner) {
      EXPECT_NE(bank.program(id).embedding, before[id].embedding);
    } else {
      EXPECT_EQ(bank.program(id).embedding, before[id].embedding);
    }
  }
}

TEST(TrainStep, AssignmentOverridesRouting) {
  auto bank = ProgramBank::create(kShape, 3, 7, 0.05);
  const auto data = counter_windows(2);
  const ProgramId winner = route(data[0].input, bank).argmin;
  const ProgramId forced = (winner + 1) % 3;
  const auto before = bank.programs();
  const std::vector<ProgramId> assignment = {forced, forced};
  const auto metrics = train_step(data, bank, assignment);
  EXPECT_EQ(metrics.usage[forced], 2U);
  EXPECT_NE(bank.program(forced).embedding, before[forced].embedding);
  EXPECT_EQ(bank.program(winner).embedding, before[winner].embedding);

  const std::vector<ProgramId> short_assignment = {0};
  EXPECT_THROW(train_step(data, bank, short_assignment), std::invalid_argument);
  const std::vector<ProgramId> unknown = {0, 9};
  EXPECT_THROW(train_step(data, bank, unknown), std::out_of_range);
  EXPECT_THROW(train_step(std::vector<TrainingPair>{}, bank), std::invalid_argument);
}

TEST(Train, ReducesMeanMinLoss) {
  auto bank = ProgramBank::create(kShape, 2, 11, 0.05);
  const auto data = counter_windows(32);
  const double before = mean_min_loss(data, bank);
  std::mt19937_64 rng(1);
  train(data, bank, 150, 8, rng);
  EXPECT_LT(mean_min_loss(data, bank), 0.8 * before);
}

TEST(Train, SameSeedSameBank) {
  const auto data = counter_windows(8);
  auto a = ProgramBank::create(kShape, 2, 4, 0.05);
  auto b = ProgramBank::create(kShape, 2, 4, 0.05);
  std::mt19937_64 ra(3), rb(3);
  train(data, a, 10, 4, ra);
  train(data, b, 10, 4, rb);
  EXPECT_EQ(a.programs(), b.programs());
  EXPECT_EQ(a.stretcher(), b.stretcher());
}

TEST(Fit, KeepsRestartWithLowestTrainingLoss) {
  const auto data = counter_windows(16);
  FitOptions options;
  options.programs = 2;
  options.density = 0.05;
  options.steps = 20;
  options.batch_size = 4;
  options.restarts = 3;
  options.seed = 9;
  FitReport report;
  const auto bank = fit(kShape, data, options, &report);
  ASSERT_EQ(report.restart_losses.size(), 3U);
  for (double l : report.restart_losses) EXPECT_LE(report.restart_losses[report.chosen], l);
  EXPECT_EQ(mean_min_loss(data, bank), report.restart_losses[report.chosen]);
  options.restarts = 0;
  EXPECT_THROW(fit(kShape, data, options), std::invalid_argument);
}

TEST(Grow, ExpensiveProgramsAreRejected) {
  auto bank = ProgramBank::create(kShape, 1, 5, 0.05);
  const auto data = counter_windows(8);
  GrowthPolicy policy;
  policy.cost_per_program = 1e9;
  policy.plateau_steps = 5;
  policy.max_plateau_rounds = 1;
  policy.trial_steps = 5;
  const auto report = grow(bank, data, policy);
  EXPECT_EQ(report.final_programs, 1U);
  EXPECT_EQ(bank.size(), 1U);
}

TEST(Grow, FreeProgramsAreAcceptedUpToTheCap) {
  auto bank = ProgramBank::create(kShape, 1, 5, 0.05);
  const auto data = counter_windows(8);
  GrowthPolicy policy;
  policy.cost_per_program = -std::numeric_limits<double>::infinity();
  policy.plateau_steps = 5;
  policy.max_plateau_rounds = 1;
  policy.trial_steps = 5;
  policy.max_programs = 3;
  const auto report = grow(bank, data, policy);
  EXPECT_EQ(bank.size(), 3U);
  EXPECT_EQ(report.attempts.size(), 2U);
  for (const auto& a : report.attempts) {
    EXPECT_TRUE(a.accepted);
    EXPECT_DOUBLE_EQ(a.gain, (a.loss_before - a.loss_after) * coded_values(data));
  }
  EXPECT_EQ(bank.program(2).key, bank.program(report.attempts[1].parent).key);
}

TEST(Usage, MatrixCountsArgminPerLabel) {
  const auto bank = ProgramBank::create(kShape, 2, 5, 0.05);
  const auto data = counter_windows(6);
  std::vector<Window> windows;
  for (const auto& p : data) windows.push_back(p.input);
  const std::vector<std::string> labels = {"a", "a", "a", "b", "b", "b"};
  const auto m = usage_matrix(windows, labels, bank);
  ASSERT_EQ(m.size(), 2U);
  for (const auto& [label, row] : m) EXPECT_EQ(row[0] + row[1], 3U);
  std::ostringstream os;
  write_usage_csv(os, m);
  EXPECT_EQ(os.str().rfind("domain,program,count\n", 0), 0U);
  EXPECT_THROW(usage_matrix(windows, std::vector<std::string>{"a"}, bank), std::invalid_argument);
}

}  // namespace
}  // namespace ltm::bank
