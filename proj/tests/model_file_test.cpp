#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ltm/model_file.hpp"

namespace ltm::model_file {
namespace {

Model sample_model(bool with_classifier) {
  auto bank = bank::ProgramBank::create({seqae::FrameSchema{6, 1, true}, 5, 4}, 3, 8, 0.05);
  bank.add_program(stretcher::sample_program(3).embedding);  // no key
  vmem::VectorMemory memory;
  memory.write(Vec(kKeyWidth, 0.25), vmem::Episodic{1, Vec(4, 0.5), 14});
  memory.write(Vec(kKeyWidth, -1.0), vmem::Consequent{Vec(4, 0.1), 2});
  memory.erase(0);
  std::optional<keyclass::KeyClassifier> classifier;
  if (with_classifier) classifier = keyclass::KeyClassifier::create(8, 3);
  return Model{std::move(bank), 5, std::move(classifier), std::move(memory)};
}

std::string bytes_of(const Model& m) {
  std::ostringstream os;
  save(os, m);
  return os.str();
}

Model parse(const std::string& bytes) {
  std::istringstream is(bytes);
  return load(is);
}

TEST(ModelFile, RoundTripIsBitExact) {
  for (bool with_classifier : {false, true}) {
    const Model m = sample_model(with_classifier);
    const std::string bytes = bytes_of(m);
    const Model back = parse(bytes);
    EXPECT_EQ(back.bank.shape(), m.bank.shape());
    EXPECT_EQ(back.bank.stretcher(), m.bank.stretcher());
    EXPECT_EQ(back.bank.programs(), m.bank.programs());
    EXPECT_EQ(back.window, 5U);
    EXPECT_EQ(back.classifier.has_value(), with_classifier);
    EXPECT_EQ(back.memory.records(), m.memory.records());
    EXPECT_EQ(back.memory.next_id(), 2U);
    EXPECT_EQ(bytes_of(back), bytes);
  }
}

TEST(ModelFile, LoadedBankComputesTheSameLosses) {
  const Model m = sample_model(false);
  const Model back = parse(bytes_of(m));
  const Window w = {{1, 0, 1, 0, 1, 0, 0.3, 0}, {0, 1, 0, 1, 0, 1, -0.2, 0}};
  for (ProgramId id = 0; id < m.bank.size(); ++id) {
    EXPECT_EQ(back.bank.autoencoder(id).loss(w), m.bank.autoencoder(id).loss(w));
  }
}

TEST(ModelFile, RejectsCorruptInput) {
  const std::string bytes = bytes_of(sample_model(true));
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(parse(bad), io::FormatError);
  EXPECT_THROW(parse(bytes.substr(0, bytes.size() / 2)), io::FormatError);
  EXPECT_THROW(parse(bytes.substr(0, bytes.size() - 1)), io::FormatError);
  EXPECT_THROW(parse(bytes + "x"), io::FormatError);
  std::string version = bytes;
  version[4] = 9;
  EXPECT_THROW(parse(version), io::FormatError);
}

TEST(ModelFile, MissingFileIsReported) {
  EXPECT_THROW(load_file("/nonexistent/model.ltmm"), std::runtime_error);
}

}  // namespace
}  // namespace ltm::model_file
