#pragma once

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "searn/core.hpp"
#include "searn/errors.hpp"
#include "searn/tasks.hpp"

namespace searn {

enum class TaskKind { Sequence, ChunkWord, ChunkEmit };
enum class LossKind { Hamming, F1 };

inline std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Sequence:
      return "sequence";
    case TaskKind::ChunkWord:
      return "chunk_word";
    case TaskKind::ChunkEmit:
      return "chunk_emit";
  }
  return "?";
}

inline std::string loss_kind_name(LossKind k) {
  return k == LossKind::Hamming ? "hamming" : "f1";
}

// Everything needed to reconstruct the task a model was trained for.
struct ModelTaskSpec {
  TaskKind task = TaskKind::Sequence;
  LossKind loss = LossKind::Hamming;
  int hash_bits = 20;
  int window = 2;
  bool use_structural = true;
  int max_phrase = 5;
  LabelVocab labels;  // sequence labels, or chunk types for chunk tasks

  std::unique_ptr<Task> build_task(const FeatureConfig& features) const {
    switch (task) {
      case TaskKind::Sequence:
        return std::make_unique<SequenceLabelTask>(labels.size(), features);
      case TaskKind::ChunkWord:
        return std::make_unique<ChunkWordTask>(labels.size(), features);
      case TaskKind::ChunkEmit:
        return std::make_unique<ChunkEmitTask>(labels.size(), max_phrase, features);
    }
    return nullptr;
  }

  FeatureConfig feature_config(std::vector<LexiconList> lexicons = {}) const {
    FeatureConfig cfg;
    cfg.hasher = FeatureHasher{hash_bits};
    cfg.window = window;
    cfg.use_structural = use_structural;
    cfg.lexicons = std::move(lexicons);
    return cfg;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

inline void write_components(std::ostream& out, const MixturePolicy& policy,
                             const std::string& component_key, const std::string& action_key) {
  out << component_key << "s " << policy.size() << "\n";
  int ci = 0;
  for (const auto& comp : policy.components()) {
    const LinearClassifier& clf = *comp.classifier;
    out << component_key << ' ' << ci++ << " weight " << format_double(comp.weight)
        << " actions " << clf.action_count() << "\n";
    for (ActionId a = 0; a < clf.action_count(); ++a) {
      std::map<std::uint32_t, double> sorted(clf.weights(a).begin(), clf.weights(a).end());
      out << action_key << ' ' << a << " bias " << format_double(clf.bias(a)) << " nnz "
          << sorted.size();
      for (const auto& [idx, w] : sorted) out << ' ' << idx << ':' << format_double(w);
      out << "\n";
    }
  }
}

}  // namespace detail

constexpr int kModelFormatVersion = 1;

// Line-oriented text model file with a checksum trailer.  The checksum
// covers every line except the "created" timestamp, so identical training
// runs produce files that differ at most in that one line.
inline void write_model(const MixturePolicy& policy, const ModelTaskSpec& spec,
                        const std::string& path, int beam_width = 1,
                        std::shared_ptr<const MixturePolicy> beam_scorer = nullptr) {
  if (policy.has_initial_component())
    throw std::invalid_argument("write_model: strip the initial policy first");
  std::ostringstream body;
  body << "searn-model " << kModelFormatVersion << "\n";
  body << "task " << task_kind_name(spec.task) << "\n";
  body << "loss " << loss_kind_name(spec.loss) << "\n";
  body << "hash_bits " << spec.hash_bits << "\n";
  body << "window " << spec.window << "\n";
  body << "structural " << (spec.use_structural ? 1 : 0) << "\n";
  body << "max_phrase " << spec.max_phrase << "\n";
  body << "beam " << beam_width << "\n";
  body << "labels " << spec.labels.size();
  for (const auto& name : spec.labels.names()) body << ' ' << name;
  body << "\n";
  detail::write_components(body, policy, "component", "action");
  if (beam_scorer) detail::write_components(body, *beam_scorer, "scomponent", "saction");

  std::string payload = body.str();
  std::uint64_t checksum = fnv1a(payload);

  std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));

  std::ofstream out(path + ".tmp");
  out << payload;
  out << "created " << stamp << "\n";
  char sumbuf[32];
  std::snprintf(sumbuf, sizeof(sumbuf), "%016" PRIx64, checksum);
  out << "checksum " << sumbuf << "\n";
  out.close();
  std::rename((path + ".tmp").c_str(), path.c_str());
}

struct LoadedModel {
  MixturePolicy policy;
  ModelTaskSpec spec;
  int beam_width = 1;
  std::shared_ptr<const MixturePolicy> scorer;  // beam insertion scorer
};

inline LoadedModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFile("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.empty()) throw CorruptFile(path + " is empty");

  // Verify the checksum over everything except "created"/"checksum" lines.
  std::string declared;
  std::ostringstream payload;
  for (const auto& l : lines) {
    if (l.rfind("checksum ", 0) == 0)
      declared = l.substr(9);
    else if (l.rfind("created ", 0) != 0)
      payload << l << "\n";
  }
  if (declared.empty()) throw CorruptFile(path + ": missing checksum");
  char sumbuf[32];
  std::snprintf(sumbuf, sizeof(sumbuf), "%016" PRIx64, fnv1a(payload.str()));
  if (declared != sumbuf) throw CorruptFile(path + ": checksum mismatch");

  LoadedModel model;
  std::vector<MixtureComponent> components, scorer_components;
  std::shared_ptr<LinearClassifier> current;
  double current_weight = 0.0;
  bool current_is_scorer = false;

  auto flush_component = [&]() {
    if (current) {
      (current_is_scorer ? scorer_components : components)
          .push_back(MixtureComponent{current, current_weight});
    }
    current.reset();
  };

  for (const auto& l : lines) {
    std::istringstream ss(l);
    std::string key;
    ss >> key;
    if (key == "searn-model") {
      int version = -1;
      ss >> version;
      if (version != kModelFormatVersion)
        throw UnsupportedVersion("model format version " + std::to_string(version));
    } else if (key == "task") {
      std::string v;
      ss >> v;
      if (v == "sequence")
        model.spec.task = TaskKind::Sequence;
      else if (v == "chunk_word")
        model.spec.task = TaskKind::ChunkWord;
      else if (v == "chunk_emit")
        model.spec.task = TaskKind::ChunkEmit;
      else
        throw CorruptFile("unknown task kind " + v);
    } else if (key == "loss") {
      std::string v;
      ss >> v;
      model.spec.loss = v == "hamming" ? LossKind::Hamming : LossKind::F1;
    } else if (key == "hash_bits") {
      ss >> model.spec.hash_bits;
    } else if (key == "window") {
      ss >> model.spec.window;
    } else if (key == "structural") {
      int v;
      ss >> v;
      model.spec.use_structural = v != 0;
    } else if (key == "max_phrase") {
      ss >> model.spec.max_phrase;
    } else if (key == "beam") {
      ss >> model.beam_width;
    } else if (key == "labels") {
      int n;
      ss >> n;
      for (int i = 0; i < n; ++i) {
        std::string name;
        ss >> name;
        model.spec.labels.intern(name);
      }
    } else if (key == "component" || key == "scomponent") {
      flush_component();
      current_is_scorer = key == "scomponent";
      int idx, actions;
      std::string kw, weight_str;
      ss >> idx >> kw >> weight_str >> kw >> actions;
      current = std::make_shared<LinearClassifier>(actions);
      current_weight = detail::parse_double(weight_str);
    } else if (key == "action" || key == "saction") {
      if (!current) throw CorruptFile("action line outside a component");
      int a, nnz;
      std::string kw, bias_str;
      ss >> a >> kw >> bias_str >> kw >> nnz;
      current->bias(a) = detail::parse_double(bias_str);
      for (int i = 0; i < nnz; ++i) {
        std::string pair;
        ss >> pair;
        auto colon = pair.find(':');
        if (colon == std::string::npos) throw CorruptFile("malformed weight pair " + pair);
        current->weights(a)[static_cast<std::uint32_t>(std::stoul(pair.substr(0, colon)))] =
            detail::parse_double(pair.substr(colon + 1));
      }
    }
  }
  flush_component();
  if (components.empty()) throw CorruptFile(path + ": no components");
  int generation = static_cast<int>(components.size());
  model.policy = MixturePolicy(std::move(components), generation);
  if (!scorer_components.empty()) {
    int sgen = static_cast<int>(scorer_components.size());
    model.scorer = std::make_shared<MixturePolicy>(std::move(scorer_components), sgen);
  }
  return model;
}

}  // namespace searn
