#pragma once

// LTMM model container: frame schema and dimensions, stretcher, program
// vectors with keys, optional key classifier and a VMEM memory snapshot.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltm/bank.hpp"
#include "ltm/io/binary.hpp"
#include "ltm/keyclass.hpp"
#include "ltm/vmem.hpp"

namespace ltm::model_file {

inline constexpr char kMagic[4] = {'L', 'T', 'M', 'M'};
inline constexpr std::uint16_t kVersion = 1;

struct Model {
  bank::ProgramBank bank;
  std::size_t window = 7;
  std::optional<keyclass::KeyClassifier> classifier;
  vmem::VectorMemory memory;
};

namespace detail {

inline void write_stretcher(io::Writer& w, const stretcher::StretcherParams& sp) {
  w.u64(sp.output_size);
  w.u64(sp.seed);
  for (std::size_t i = 0; i < 3; ++i) {
    w.f64s(sp.weights[i]);
    w.f64s(sp.biases[i]);
  }
  const auto& mask = *sp.last.mask;
  w.u32(static_cast<std::uint32_t>(mask.rows()));
  w.u32(static_cast<std::uint32_t>(mask.cols()));
  w.u64(mask.size());
  for (std::uint32_t r : mask.row_index()) w.u32(r);
  for (std::uint32_t c : mask.col_index()) w.u32(c);
  w.f64s(sp.last.weights);
  w.f64(sp.last.density);
  w.f64s(sp.last_bias);
}

inline stretcher::StretcherParams read_stretcher(io::Reader& r) {
  stretcher::StretcherParams sp;
  sp.output_size = r.u64();
  sp.seed = r.u64();
  for (std::size_t i = 0; i < 3; ++i) {
    sp.weights[i] = r.f64s();
    sp.biases[i] = r.f64s();
    const std::size_t in = stretcher::kHiddenWidths[i];
    const std::size_t out = stretcher::kHiddenWidths[i + 1];
    if (sp.weights[i].size() != in * out || sp.biases[i].size() != out) {
      throw io::FormatError("model: stretcher layer " + std::to_string(i + 1) + " has the wrong size");
    }
  }
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint64_t nnz = r.u64();
  r.require_remaining(nnz * 8, "stretcher mask");
  std::vector<std::uint32_t> ri(nnz), ci(nnz);
  for (auto& v : ri) v = r.u32();
  for (auto& v : ci) v = r.u32();
  try {
    sp.last.mask = std::make_shared<const numeric::SparseMask>(rows, cols, std::move(ri), std::move(ci));
  } catch (const std::exception& e) {
    throw io::FormatError(std::string("model: bad stretcher mask: ") + e.what());
  }
  sp.last.weights = r.f64s();
  sp.last.density = r.f64();
  sp.last_bias = r.f64s();
  if (sp.last.weights.size() != nnz || sp.last_bias.size() != rows || rows != sp.output_size ||
      cols != stretcher::kHiddenWidths.back()) {
    throw io::FormatError("model: sparse stretcher layer sizes disagree");
  }
  return sp;
}

}  // namespace detail

/// Layout: "LTMM", u16 version, u32 bits, u32 actions, u8 tagged, u32
/// hidden, u32 thought, u32 window, stretcher, u32 program count and per
/// program (u32 id, f64 array embedding, u8 has key, [f64 array key]), u8 has
/// classifier ([u32 width, f64 array params]), u64 memory byte count, VMEM
/// snapshot. f64 arrays are a u64 length followed by the values.
inline void save(std::ostream& os, const Model& m) {
  io::Writer w(os);
  w.magic(kMagic);
  w.u16(kVersion);
  const auto& shape = m.bank.shape();
  w.u32(static_cast<std::uint32_t>(shape.frame.bits));
  w.u32(static_cast<std::uint32_t>(shape.frame.actions));
  w.u8(shape.frame.tagged ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(shape.hidden));
  w.u32(static_cast<std::uint32_t>(shape.thought));
  w.u32(static_cast<std::uint32_t>(m.window));
  detail::write_stretcher(w, m.bank.stretcher());
  w.u32(static_cast<std::uint32_t>(m.bank.size()));
  for (const ProgramVector& p : m.bank.programs()) {
    w.u32(p.id);
    w.f64s(p.embedding);
    w.u8(p.key ? 1 : 0);
    if (p.key) w.f64s(*p.key);
  }
  w.u8(m.classifier ? 1 : 0);
  if (m.classifier) {
    w.u32(static_cast<std::uint32_t>(m.classifier->width()));
    w.f64s(m.classifier->params());
  }
  std::ostringstream mem;
  m.memory.save(mem);
  const std::string bytes = mem.str();
  w.u64(bytes.size());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  w.finish();
}

inline Model load(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kMagic, "model");
  const std::uint16_t version = r.u16();
  if (version != kVersion) throw io::FormatError("model: unsupported version " + std::to_string(version));
  seqae::ModelShape shape;
  shape.frame.bits = r.u32();
  shape.frame.actions = r.u32();
  shape.frame.tagged = r.u8() != 0;
  shape.hidden = r.u32();
  shape.thought = r.u32();
  const std::size_t window = r.u32();
  auto sp = detail::read_stretcher(r);
  const std::uint32_t n = r.u32();
  std::vector<ProgramVector> programs;
  for (std::uint32_t i = 0; i < n; ++i) {
    ProgramVector p;
    p.id = r.u32();
    p.embedding = r.f64s();
    if (r.u8() != 0) p.key = r.f64s();
    programs.push_back(std::move(p));
  }
  std::optional<keyclass::KeyClassifier> classifier;
  if (r.u8() != 0) {
    const std::size_t width = r.u32();
    classifier.emplace(width, r.f64s());
  }
  const std::uint64_t mem_size = r.u64();
  r.require_remaining(mem_size, "memory section");
  const auto raw = r.bytes(mem_size);
  if (r.remaining() != 0) throw io::FormatError("model: trailing bytes after memory section");
  std::istringstream mem(std::string(raw.begin(), raw.end()));
  try {
    bank::ProgramBank bank(shape, std::move(sp), std::move(programs));
    return Model{std::move(bank), window, std::move(classifier), vmem::VectorMemory::load(mem)};
  } catch (const io::FormatError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw io::FormatError(std::string("model: ") + e.what());
  }
}

inline void save_file(const std::filesystem::path& path, const Model& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("model: cannot open " + path.string());
  save(os, m);
}

inline Model load_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("model: cannot open " + path.string());
  return load(is);
}

}  // namespace ltm::model_file
