// ltm: command-line driver. Subcommands gen | train | recall | predict |
// grow | stats; see README.md for the configuration keys.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ltm/bank.hpp"
#include "ltm/config.hpp"
#include "ltm/datagen.hpp"
#include "ltm/keyclass.hpp"
#include "ltm/lifelong.hpp"
#include "ltm/model_file.hpp"

namespace {

using namespace ltm;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t k = 1;
  std::string mode = "average";
  std::string trace;
  std::string model;
  std::string query;
};

config::ExperimentConfig resolve(const Flags& f) {
  config::ExperimentConfig c = f.config.empty() ? config::ExperimentConfig{} : config::load(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.trace.empty()) c.trace = f.trace;
  if (!f.model.empty()) c.model = f.model;
  if (!f.query.empty()) c.query = f.query;
  return c;
}

std::vector<Window> windows_of(std::span<const Frame> frames, std::size_t length) {
  std::vector<Window> out;
  for (const auto& s : lifelong::segment_fixed(frames.size(), length)) out.push_back(lifelong::slice(frames, s));
  return out;
}

datagen::Trace load_checked_trace(const fs::path& path, const config::ExperimentConfig& c) {
  datagen::Trace t = datagen::load_trace(path);
  if (t.width != c.bits + c.actions) {
    throw std::invalid_argument("trace " + path.string() + " has width " + std::to_string(t.width) +
                                ", config expects " + std::to_string(c.bits + c.actions));
  }
  return t;
}

void write_frames(const fs::path& path, std::span<const Window> windows, std::size_t width) {
  std::vector<Frame> frames;
  for (const Window& w : windows) frames.insert(frames.end(), w.begin(), w.end());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  datagen::write_trace(os, frames, width);
}

// Windows labeled by the label of their first frame, for evaluation only.
void write_usage(const fs::path& path, std::span<const Window> windows, std::span<const std::string> frame_labels,
                 std::size_t window, const bank::ProgramBank& bank) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < windows.size(); ++i) labels.push_back(frame_labels[i * window]);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  bank::write_usage_csv(os, bank::usage_matrix(windows, labels, bank));
}

int cmd_gen(const Flags& f) {
  const auto c = resolve(f);
  auto script = datagen::default_script(c.frames_per_episode, c.rounds, c.seed, c.bits);
  script.domains = datagen::default_domains(c.bits, c.actions);
  const auto stream = datagen::compose(script);
  const fs::path out = f.out.empty() ? c.trace : fs::path(f.out);
  datagen::save_trace(stream.frames, out, datagen::TraceEncoding::kBitPacked, c.actions);
  const fs::path labels = f.out.empty() ? c.labels_path() : fs::path(f.out + ".labels");
  datagen::save_labels(stream.labels, labels);
  std::cout << "wrote " << stream.frames.size() << " frames to " << out.string() << " (labels " << labels.string()
            << ")\n";
  return 0;
}

int cmd_train(const Flags& f) {
  const auto c = resolve(f);
  const auto trace = load_checked_trace(c.trace, c);
  auto bank = bank::ProgramBank::create(c.shape(), c.programs, c.bank_seed(), c.density, c.adam(), c.correlation);
  lifelong::Lifelong ll(std::move(bank), c.lifelong(), vmem::VectorMemory(c.memory));
  ll.ingest(trace.frames);
  ll.flush();

  const auto windows = windows_of(trace.frames, c.window);
  std::optional<keyclass::KeyClassifier> classifier;
  if (c.retrieval_epochs > 0 && !windows.empty()) {
    classifier = keyclass::KeyClassifier::create(ll.bank().shape().frame.width(), c.seed);
    keyclass::RetrievalConfig rc;
    rc.epochs = c.retrieval_epochs;
    rc.batch_size = c.batch_size;
    rc.learning_rate = c.learning_rate;
    rc.key_learning_rate = c.key_learning_rate;
    rc.seed = c.seed;
    keyclass::train_retrieval(windows, ll.bank(), *classifier, keyclass::Phase::kAuto, rc);
  }
  keyclass::sync_program_keys(ll.bank(), ll.memory());

  {
    std::ofstream os(c.metrics);
    if (!os) throw std::runtime_error("cannot open " + c.metrics.string());
    lifelong::write_metrics_csv(os, ll.history());
  }
  if (fs::exists(c.labels_path())) {
    const auto labels = datagen::load_labels(c.labels_path());
    if (labels.size() != trace.frames.size()) throw std::invalid_argument("labels file does not match the trace");
    write_usage(c.usage, windows, labels, c.window, ll.bank());
    std::cout << "usage matrix: " << c.usage.string() << '\n';
  }
  const fs::path out = f.out.empty() ? c.model : fs::path(f.out);
  model_file::save_file(out, model_file::Model{ll.bank(), c.window, classifier, ll.memory()});
  std::cout << "trained on " << trace.frames.size() << " frames: " << ll.history().size() << " consolidations, "
            << ll.bank().size() << " programs, " << ll.memory().size() << " memory records\n"
            << "model: " << out.string() << "\nmetrics: " << c.metrics.string() << '\n';
  return 0;
}

struct Loaded {
  config::ExperimentConfig config;
  model_file::Model model;
};

Loaded load_model(const Flags& f) {
  auto c = resolve(f);
  return Loaded{c, model_file::load_file(c.model)};
}

int cmd_recall(const Flags& f) {
  auto [c, m] = load_model(f);
  if (m.memory.count(vmem::PayloadKind::kEpisodic) == 0) throw std::runtime_error("empty memory");
  const auto query = load_checked_trace(c.query, c);
  auto lc = c.lifelong();
  lc.window = m.window;
  const std::size_t width = m.bank.shape().frame.width();
  lifelong::Lifelong ll(std::move(m.bank), lc, std::move(m.memory));
  std::vector<Window> out;
  const auto windows = windows_of(query.frames, lc.window);
  for (std::size_t q = 0; q < windows.size(); ++q) {
    for (const auto& r : ll.recall(windows[q], f.k)) {
      std::cout << "query " << q << " record " << r.id << " program " << r.program << " distance " << r.distance
                << '\n';
      out.push_back(r.reconstruction);
    }
  }
  if (out.empty()) throw std::runtime_error("no query windows in " + c.query.string());
  const fs::path path = f.out.empty() ? c.output : fs::path(f.out);
  write_frames(path, out, width);
  std::cout << "reconstructions: " << path.string() << '\n';
  return 0;
}

int cmd_predict(const Flags& f) {
  const auto mode = lifelong::parse_mode(f.mode);
  auto [c, m] = load_model(f);
  if (m.memory.empty()) throw std::runtime_error("empty memory");
  const auto query = load_checked_trace(c.query, c);
  auto lc = c.lifelong();
  lc.window = m.window;
  const std::size_t width = m.bank.shape().frame.width();
  lifelong::Lifelong ll(std::move(m.bank), lc, std::move(m.memory));
  std::vector<Window> out;
  for (const Window& w : windows_of(query.frames, lc.window)) {
    for (Window& p : ll.predict_next(w, f.k, mode)) out.push_back(std::move(p));
  }
  if (out.empty()) throw std::runtime_error("no query windows in " + c.query.string());
  const fs::path path = f.out.empty() ? c.output : fs::path(f.out);
  write_frames(path, out, width);
  std::cout << "predictions (" << out.size() << " windows): " << path.string() << '\n';
  return 0;
}

int cmd_grow(const Flags& f) {
  const auto c = resolve(f);
  const auto trace = load_checked_trace(c.trace, c);
  std::vector<bank::TrainingPair> data;
  for (Window& w : windows_of(trace.frames, c.window)) data.push_back(bank::TrainingPair::reconstruction(std::move(w)));
  auto bank = bank::ProgramBank::create(c.shape(), c.programs, c.bank_seed(), c.density, c.adam(), c.correlation);
  auto policy = c.growth;
  policy.batch_size = c.batch_size;
  policy.seed = c.seed;
  const auto report = bank::grow(bank, data, policy);
  std::cout << "initial programs " << report.initial_programs << ", mean min-loss " << report.initial_loss << '\n';
  for (const auto& a : report.attempts) {
    std::cout << "split program " << a.parent << ": loss " << a.loss_before << " -> " << a.loss_after << ", gain "
              << a.gain << " nats, " << (a.accepted ? "accepted" : "rejected") << '\n';
  }
  std::cout << "final programs " << report.final_programs << '\n';
  const fs::path out = f.out.empty() ? c.model : fs::path(f.out);
  model_file::save_file(out, model_file::Model{bank, c.window, std::nullopt, vmem::VectorMemory(c.memory)});
  std::cout << "model: " << out.string() << '\n';
  return 0;
}

int cmd_stats(const Flags& f) {
  auto [c, m] = load_model(f);
  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw std::runtime_error("cannot open " + f.out);
  }
  std::ostream& os = f.out.empty() ? std::cout : file;
  const auto& shape = m.bank.shape();
  os << "programs," << m.bank.size() << '\n'
     << "bits," << shape.frame.bits << '\n'
     << "actions," << shape.frame.actions << '\n'
     << "hidden," << shape.hidden << '\n'
     << "thought," << shape.thought << '\n'
     << "window," << m.window << '\n'
     << "classifier," << (m.classifier ? "yes" : "no") << '\n'
     << "records," << m.memory.size() << '\n';
  for (auto kind : {vmem::PayloadKind::kEpisodic, vmem::PayloadKind::kProgram, vmem::PayloadKind::kConsequent}) {
    os << "records." << vmem::to_string(kind) << ',' << m.memory.count(kind) << '\n';
  }
  if (fs::exists(c.trace) && fs::exists(c.labels_path())) {
    const auto trace = load_checked_trace(c.trace, c);
    const auto labels = datagen::load_labels(c.labels_path());
    if (labels.size() == trace.frames.size()) {
      const auto windows = windows_of(trace.frames, m.window);
      std::vector<std::string> wl;
      for (std::size_t i = 0; i < windows.size(); ++i) wl.push_back(labels[i * m.window]);
      bank::write_usage_csv(os, bank::usage_matrix(windows, wl, m.bank));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong trace memory: program-vector bank with content-addressable memory"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "global seed (overrides the config)");
    sub->add_option("--out", flags.out, "output path");
    sub->add_option("--k", flags.k, "neighbours to retrieve")->check(CLI::PositiveNumber);
    sub->add_option("--mode", flags.mode, "prediction mode")->check(CLI::IsMember({"average", "multi"}));
    sub->add_option("--trace", flags.trace, "trace file (overrides paths.trace)");
    sub->add_option("--model", flags.model, "model file (overrides paths.model)");
    sub->add_option("--query", flags.query, "query trace (overrides paths.query)");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Command commands[] = {
      {"gen", "generate the synthetic multi-domain trace", cmd_gen},
      {"train", "run the lifelong loop over a trace and save the model", cmd_train},
      {"recall", "retrieve and decode episodic memories for query windows", cmd_recall},
      {"predict", "predict the next window of each query window", cmd_predict},
      {"grow", "grow a bank on a trace under the MDL policy", cmd_grow},
      {"stats", "summarize a model file", cmd_stats},
  };
  int (*selected)(const Flags&) = nullptr;
  for (const Command& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    sub->callback([&selected, run = c.run] { selected = run; });
  }
  CLI11_PARSE(app, argc, argv);
  try {
    return selected(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
