#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "searn/core.hpp"
#include "searn/errors.hpp"
#include "searn/feature_vector.hpp"
#include "searn/rng.hpp"

namespace searn {

// --------------------------------------------------------------------------
// Sentences and label vocabularies
// --------------------------------------------------------------------------

struct Token {
  std::string surface;
  std::vector<std::string> attrs;  // e.g. part-of-speech columns
};

struct Sentence {
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
};

struct SequenceInstance final : Instance {
  Sentence sentence;
  std::vector<int> gold;  // empty when unlabeled

  bool has_gold() const { return !gold.empty(); }
  int length() const { return sentence.size(); }
};

inline std::vector<const Instance*> instance_ptrs(const std::vector<SequenceInstance>& v) {
  std::vector<const Instance*> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(&x);
  return out;
}

class LabelVocab {
 public:
  int intern(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    names_.push_back(name);
    index_[name] = id;
    return id;
  }
  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// --------------------------------------------------------------------------
// Losses
// --------------------------------------------------------------------------

inline int hamming_loss(const std::vector<int>& y, const std::vector<int>& y_hat) {
  if (y.size() != y_hat.size()) throw LengthMismatch("hamming_loss: length mismatch");
  int loss = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] != y_hat[i]) ++loss;
  return loss;
}

struct ChunkSpan {
  int start = 0;
  int length = 1;
  int type = 0;

  int end() const { return start + length; }  // one past the last token

  bool operator==(const ChunkSpan& o) const {
    return start == o.start && length == o.length && type == o.type;
  }
  bool operator<(const ChunkSpan& o) const {
    if (start != o.start) return start < o.start;
    if (length != o.length) return length < o.length;
    return type < o.type;
  }
};

// BIO tag ids: O = 0, B-type l = 1 + 2l, I-type l = 2 + 2l.
inline int bio_outside() { return 0; }
inline int bio_begin(int type) { return 1 + 2 * type; }
inline int bio_inside(int type) { return 2 + 2 * type; }
inline bool bio_is_begin(int tag) { return tag >= 1 && tag % 2 == 1; }
inline bool bio_is_inside(int tag) { return tag >= 2 && tag % 2 == 0; }
inline int bio_type(int tag) { return tag == 0 ? -1 : (tag - 1) / 2; }
inline int bio_tag_count(int type_count) { return 1 + 2 * type_count; }

inline std::string bio_tag_name(int tag, const LabelVocab& types) {
  if (tag == 0) return "O";
  return (bio_is_begin(tag) ? "B-" : "I-") + types.name(bio_type(tag));
}

// Parse "O" / "B-X" / "I-X"; unknown shapes intern as a bare type with B.
inline int bio_tag_from_name(const std::string& name, LabelVocab& types) {
  if (name == "O" || name == "o") return 0;
  if (name.size() > 2 && (name[0] == 'B' || name[0] == 'I') && name[1] == '-') {
    int type = types.intern(name.substr(2));
    return name[0] == 'B' ? bio_begin(type) : bio_inside(type);
  }
  return bio_begin(types.intern(name));
}

// Decode a BIO label sequence into chunk spans.  An I-X with no open chunk
// of type X is repaired as B-X.
inline std::vector<ChunkSpan> bio_decode(const std::vector<int>& labels) {
  std::vector<ChunkSpan> spans;
  int open_start = -1, open_type = -1;
  auto close = [&](int end) {
    if (open_start >= 0) spans.push_back({open_start, end - open_start, open_type});
    open_start = -1;
    open_type = -1;
  };
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    int tag = labels[i];
    if (tag == 0) {
      close(i);
    } else if (bio_is_begin(tag)) {
      close(i);
      open_start = i;
      open_type = bio_type(tag);
    } else {  // inside
      if (open_start >= 0 && open_type == bio_type(tag)) continue;
      close(i);
      open_start = i;
      open_type = bio_type(tag);
    }
  }
  close(static_cast<int>(labels.size()));
  return spans;
}

inline std::vector<int> bio_encode(const std::vector<ChunkSpan>& spans, int n) {
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (const auto& s : spans) {
    labels[static_cast<std::size_t>(s.start)] = bio_begin(s.type);
    for (int i = s.start + 1; i < s.end(); ++i) labels[static_cast<std::size_t>(i)] = bio_inside(s.type);
  }
  return labels;
}

// F1 over typed spans: 2|y & yhat| / (|y| + |yhat|); both empty counts as a
// perfect match.  Returns (f1, cost = 1 - f1).
inline std::pair<double, double> f1_and_cost(const std::vector<ChunkSpan>& y,
                                             const std::vector<ChunkSpan>& y_hat) {
  if (y.empty() && y_hat.empty()) return {1.0, 0.0};
  std::vector<ChunkSpan> a(y), b(y_hat);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  double f1 = 2.0 * static_cast<double>(inter) / static_cast<double>(a.size() + b.size());
  return {f1, 1.0 - f1};
}

// --------------------------------------------------------------------------
// Feature extraction
// --------------------------------------------------------------------------

struct LexiconList {
  std::string name;
  std::unordered_set<std::string> entries;
};

struct FeatureConfig {
  FeatureHasher hasher{20};
  int window = 2;
  bool use_structural = true;
  bool use_token_attrs = true;
  std::vector<LexiconList> lexicons;
};

namespace detail {

inline std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::string case_pattern(const std::string& s) {
  bool upper = false, lower = false, digit = false, other = false;
  for (char c : s) {
    if (c >= 'A' && c <= 'Z')
      upper = true;
    else if (c >= 'a' && c <= 'z')
      lower = true;
    else if (c >= '0' && c <= '9')
      digit = true;
    else
      other = true;
  }
  std::string p;
  if (upper) p += 'A';
  if (lower) p += 'a';
  if (digit) p += '0';
  if (other) p += '.';
  return p.empty() ? "-" : p;
}

// Base (input-only) features for the token window centered at position t.
inline void emit_window_features(const FeatureConfig& cfg, const Sentence& sent, int t,
                                 std::vector<FeatureVector::Entry>& out) {
  const int n = sent.size();
  for (int d = -cfg.window; d <= cfg.window; ++d) {
    int p = t + d;
    std::string pos_tag = "[" + std::to_string(d) + "]";
    if (p < 0) {
      out.push_back({cfg.hasher.lexical("w" + pos_tag + "=<s>"), 1.0});
      continue;
    }
    if (p >= n) {
      out.push_back({cfg.hasher.lexical("w" + pos_tag + "=</s>"), 1.0});
      continue;
    }
    const Token& tok = sent.tokens[static_cast<std::size_t>(p)];
    const std::string& w = tok.surface;
    std::string lw = lowercase(w);
    out.push_back({cfg.hasher.lexical("w" + pos_tag + "=" + w), 1.0});
    out.push_back({cfg.hasher.lexical("lw" + pos_tag + "=" + lw), 1.0});
    out.push_back({cfg.hasher.lexical("cp" + pos_tag + "=" + case_pattern(w)), 1.0});
    for (int k = 1; k <= 3 && k <= static_cast<int>(w.size()); ++k) {
      out.push_back({cfg.hasher.lexical("pre" + std::to_string(k) + pos_tag + "=" +
                                        w.substr(0, static_cast<std::size_t>(k))),
                     1.0});
      out.push_back({cfg.hasher.lexical("suf" + std::to_string(k) + pos_tag + "=" +
                                        w.substr(w.size() - static_cast<std::size_t>(k))),
                     1.0});
    }
    if (cfg.use_token_attrs) {
      for (std::size_t k = 0; k < tok.attrs.size(); ++k) {
        const std::string& a = tok.attrs[k];
        out.push_back({cfg.hasher.lexical("a" + std::to_string(k) + pos_tag + "=" + a), 1.0});
        if (!a.empty())
          out.push_back({cfg.hasher.lexical("a" + std::to_string(k) + "c" + pos_tag + "=" + a.substr(0, 1)), 1.0});
      }
    }
    if (d == 0) {
      for (const auto& lex : cfg.lexicons)
        if (lex.entries.count(lw))
          out.push_back({cfg.hasher.lexical("lex:" + lex.name), 1.0});
    }
  }
}

// Structural features over the previous 1-3 decisions.
inline void emit_history_features(const FeatureConfig& cfg, const std::vector<ActionId>& prefix,
                                  std::vector<FeatureVector::Entry>& out) {
  if (!cfg.use_structural) return;
  auto past = [&](int back) -> std::string {
    int i = static_cast<int>(prefix.size()) - back;
    return i >= 0 ? std::to_string(prefix[static_cast<std::size_t>(i)]) : "<s>";
  };
  out.push_back({cfg.hasher.structural("s1=" + past(1)), 1.0});
  out.push_back({cfg.hasher.structural("s2=" + past(2) + "," + past(1)), 1.0});
  out.push_back({cfg.hasher.structural("s3=" + past(3) + "," + past(2) + "," + past(1)), 1.0});
}

inline const SequenceInstance& as_sequence(const Instance& x) {
  return static_cast<const SequenceInstance&>(x);
}

}  // namespace detail

// --------------------------------------------------------------------------
// Word-at-a-time sequence labeling under Hamming loss
// --------------------------------------------------------------------------

class SequenceLabelTask : public Task {
 public:
  SequenceLabelTask(int label_count, FeatureConfig config)
      : label_count_(label_count), config_(std::move(config)) {}

  const FeatureConfig& feature_config() const { return config_; }

  int action_count() const override { return label_count_; }

  bool is_terminal(const SearchState& s) const override {
    return s.t() >= detail::as_sequence(*s.instance).length();
  }

  FeatureVector features(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<FeatureVector::Entry> raw;
    detail::emit_window_features(config_, inst.sentence, s.t(), raw);
    detail::emit_history_features(config_, s.prefix, raw);
    return FeatureVector::from_entries(std::move(raw));
  }

  bool has_reference(const SearchState& s) const override {
    return detail::as_sequence(*s.instance).has_gold();
  }

  // Hamming regrets decompose per position, so the myopic choice realizes
  // the optimal completion.
  ActionId initial_policy_action(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("sequence task: no reference labels");
    return inst.gold[static_cast<std::size_t>(s.t())];
  }

  double completion_loss(const SearchState& s, ActionId a) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("sequence task: no reference labels");
    int mistakes = prefix_mistakes(s);
    if (a != inst.gold[static_cast<std::size_t>(s.t())]) ++mistakes;
    return static_cast<double>(mistakes);
  }

  double completion_loss_from(const SearchState& s) const override {
    return static_cast<double>(prefix_mistakes(s));
  }

  double final_loss(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("sequence task: no reference labels");
    return static_cast<double>(hamming_loss(inst.gold, output_labels(s)));
  }

  std::vector<int> output_labels(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<int> out(s.prefix.begin(), s.prefix.end());
    out.resize(static_cast<std::size_t>(inst.length()), 0);
    return out;
  }

  int horizon(const Instance& x) const override { return detail::as_sequence(x).length(); }

  double max_loss(const Instance& x) const override {
    return label_count_ > 1 ? static_cast<double>(detail::as_sequence(x).length()) : 0.0;
  }

 private:
  int prefix_mistakes(const SearchState& s) const {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("sequence task: no reference labels");
    int mistakes = 0;
    for (std::size_t i = 0; i < s.prefix.size(); ++i)
      if (s.prefix[i] != inst.gold[i]) ++mistakes;
    return mistakes;
  }

  int label_count_;
  FeatureConfig config_;
};

// --------------------------------------------------------------------------
// Word-at-a-time BIO chunking under F1 cost
// --------------------------------------------------------------------------

class ChunkWordTask : public Task {
 public:
  ChunkWordTask(int type_count, FeatureConfig config)
      : type_count_(type_count), config_(std::move(config)) {}

  int type_count() const { return type_count_; }
  const FeatureConfig& feature_config() const { return config_; }

  int action_count() const override { return bio_tag_count(type_count_); }

  bool is_terminal(const SearchState& s) const override {
    return s.t() >= detail::as_sequence(*s.instance).length();
  }

  FeatureVector features(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<FeatureVector::Entry> raw;
    detail::emit_window_features(config_, inst.sentence, s.t(), raw);
    detail::emit_history_features(config_, s.prefix, raw);
    return FeatureVector::from_entries(std::move(raw));
  }

  bool has_reference(const SearchState& s) const override {
    return detail::as_sequence(*s.instance).has_gold();
  }

  // The three-way case analysis over the reference label at t: begin X when
  // the reference begins X; in X when the reference continues X and our own
  // previous prediction has X open; otherwise out (the "equally optimal"
  // states resolve to out).
  ActionId initial_policy_action(const SearchState& s) const override {
    std::vector<int> ref = canonical_reference(s);
    int t = s.t();
    int want = ref[static_cast<std::size_t>(t)];
    if (bio_is_begin(want)) return want;
    if (bio_is_inside(want)) {
      int type = bio_type(want);
      if (t > 0) {
        int prev = s.prefix[static_cast<std::size_t>(t - 1)];
        if (prev == bio_begin(type) || prev == bio_inside(type)) return want;
      }
      return bio_outside();
    }
    return bio_outside();
  }

  double completion_loss(const SearchState& s, ActionId a) const override {
    std::vector<ChunkSpan> ref = reference_spans(s);
    std::vector<int> labels(s.prefix.begin(), s.prefix.end());
    labels.push_back(a);
    int t = s.t();  // position the action labels

    // Split the partial decode into closed spans and the possibly still-open
    // last span.
    std::vector<ChunkSpan> decoded = bio_decode(labels);
    bool open = false;
    ChunkSpan open_span;
    if (!decoded.empty() && decoded.back().end() == t + 1) {
      int last = labels.back();
      if (last != bio_outside()) {
        open = true;
        open_span = decoded.back();
        decoded.pop_back();
      }
    }

    std::size_t closed_matches = 0;
    {
      std::vector<ChunkSpan> sorted_ref(ref);
      std::sort(sorted_ref.begin(), sorted_ref.end());
      for (const auto& c : decoded)
        if (std::binary_search(sorted_ref.begin(), sorted_ref.end(), c)) ++closed_matches;
    }

    // Can the open span still be completed into a reference span?
    bool completable = false;
    if (open) {
      for (const auto& r : ref)
        if (r.start == open_span.start && r.type == open_span.type && r.end() - 1 >= t) {
          completable = true;
          break;
        }
    }

    std::size_t future = 0;
    for (const auto& r : ref)
      if (r.start > t) ++future;

    double inter = static_cast<double>(closed_matches + (completable ? 1 : 0) + future);
    double hyp = static_cast<double>(decoded.size() + (open ? 1 : 0) + future);
    double refs = static_cast<double>(ref.size());
    if (refs + hyp == 0.0) return 0.0;
    return 1.0 - 2.0 * inter / (refs + hyp);
  }

  double final_loss(const SearchState& s) const override {
    return f1_and_cost(reference_spans(s), bio_decode(output_labels(s))).second;
  }

  std::vector<int> output_labels(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<int> out(s.prefix.begin(), s.prefix.end());
    out.resize(static_cast<std::size_t>(inst.length()), 0);
    return out;
  }

  int horizon(const Instance& x) const override { return detail::as_sequence(x).length(); }

  double max_loss(const Instance& x) const override {
    (void)x;
    return 1.0;
  }

  std::vector<ChunkSpan> reference_spans(const SearchState& s) const {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("chunk task: no reference labels");
    return bio_decode(inst.gold);
  }

 private:
  // Reference labels with I-after-O repairs applied, so the case analysis
  // sees well-formed chunks.
  std::vector<int> canonical_reference(const SearchState& s) const {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("chunk task: no reference labels");
    return bio_encode(bio_decode(inst.gold), inst.length());
  }

  int type_count_;
  FeatureConfig config_;
};

// --------------------------------------------------------------------------
// Chunk-at-a-time segmentation under F1 cost
// --------------------------------------------------------------------------
//
// Actions encode (length m, type l) chunk emissions: id = (m-1)*K + l for
// m in 1..M, where K counts the chunk types plus one trailing "outside"
// pseudo-type that consumes tokens without producing a span.  The final id
// is the "complete" indicator, legal exactly when the emitted lengths sum
// to the sentence length; overruns are masked out.

class ChunkEmitTask : public Task {
 public:
  ChunkEmitTask(int type_count, int max_phrase_length, FeatureConfig config)
      : type_count_(type_count), max_phrase_(max_phrase_length), config_(std::move(config)) {}

  int type_count() const { return type_count_; }
  int max_phrase_length() const { return max_phrase_; }
  const FeatureConfig& feature_config() const { return config_; }

  int emit_types() const { return type_count_ + 1; }  // + outside
  int outside_type() const { return type_count_; }
  ActionId complete_action() const { return max_phrase_ * emit_types(); }
  ActionId emit_action(int length, int type) const { return (length - 1) * emit_types() + type; }
  int action_length(ActionId a) const { return a / emit_types() + 1; }
  int action_type(ActionId a) const { return a % emit_types(); }

  int action_count() const override { return max_phrase_ * emit_types() + 1; }

  bool is_terminal(const SearchState& s) const override {
    return !s.prefix.empty() && s.prefix.back() == complete_action();
  }

  std::vector<std::uint8_t> action_mask(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    int p = covered(s);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(action_count()), 0);
    for (int m = 1; m <= max_phrase_; ++m) {
      if (p + m > inst.length()) break;
      for (int l = 0; l < emit_types(); ++l)
        mask[static_cast<std::size_t>(emit_action(m, l))] = 1;
    }
    if (p == inst.length()) mask[static_cast<std::size_t>(complete_action())] = 1;
    return mask;
  }

  FeatureVector features(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    int p = covered(s);
    std::vector<FeatureVector::Entry> raw;
    detail::emit_window_features(config_, inst.sentence, std::min(p, inst.length() - 1), raw);
    if (config_.use_structural) {
      detail::emit_history_features(config_, s.prefix, raw);
      emit_previous_chunk_features(s, raw);
    }
    return FeatureVector::from_entries(std::move(raw));
  }

  bool has_reference(const SearchState& s) const override {
    return detail::as_sequence(*s.instance).has_gold();
  }

  // Emit the reference's next chunk when it starts here (truncated to the
  // legal maximum), outside filler up to the next recoverable chunk
  // otherwise, and complete when the tokens are exhausted.
  ActionId initial_policy_action(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<ChunkSpan> ref = reference_spans(s);
    int p = covered(s);
    int n = inst.length();
    if (p == n) return complete_action();
    const ChunkSpan* next = nullptr;
    for (const auto& r : ref)
      if (r.start >= p) {
        next = &r;
        break;
      }
    if (next != nullptr && next->start == p) {
      int len = std::min(next->length, std::min(max_phrase_, n - p));
      return emit_action(len, next->type);
    }
    int gap = (next != nullptr ? next->start : n) - p;
    return emit_action(std::min(gap, max_phrase_), outside_type());
  }

  double completion_loss(const SearchState& s, ActionId a) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<ChunkSpan> ref = reference_spans(s);
    std::vector<ChunkSpan> emitted = emitted_spans(s);
    int p = covered(s);

    if (a == complete_action()) return f1_and_cost(ref, emitted).second;

    int m = action_length(a), l = action_type(a);
    std::vector<ChunkSpan> sorted_ref(ref);
    std::sort(sorted_ref.begin(), sorted_ref.end());

    std::size_t matches = 0;
    for (const auto& c : emitted)
      if (std::binary_search(sorted_ref.begin(), sorted_ref.end(), c)) ++matches;

    bool emits_span = l != outside_type();
    if (emits_span &&
        std::binary_search(sorted_ref.begin(), sorted_ref.end(), ChunkSpan{p, m, l}))
      ++matches;

    std::size_t future = 0;
    for (const auto& r : ref)
      if (r.start >= p + m && r.length <= max_phrase_) ++future;

    double inter = static_cast<double>(matches + future);
    double hyp = static_cast<double>(emitted.size() + (emits_span ? 1 : 0) + future);
    double refs = static_cast<double>(ref.size());
    if (refs + hyp == 0.0) return 0.0;
    return 1.0 - 2.0 * inter / (refs + hyp);
  }

  double completion_loss_from(const SearchState& s) const override {
    if (is_terminal(s)) return final_loss(s);
    std::vector<ChunkSpan> ref = reference_spans(s);
    std::vector<ChunkSpan> emitted = emitted_spans(s);
    int p = covered(s);
    std::vector<ChunkSpan> sorted_ref(ref);
    std::sort(sorted_ref.begin(), sorted_ref.end());
    std::size_t matches = 0;
    for (const auto& c : emitted)
      if (std::binary_search(sorted_ref.begin(), sorted_ref.end(), c)) ++matches;
    std::size_t future = 0;
    for (const auto& r : ref)
      if (r.start >= p && r.length <= max_phrase_) ++future;
    double inter = static_cast<double>(matches + future);
    double hyp = static_cast<double>(emitted.size() + future);
    double refs = static_cast<double>(ref.size());
    if (refs + hyp == 0.0) return 0.0;
    return 1.0 - 2.0 * inter / (refs + hyp);
  }

  double final_loss(const SearchState& s) const override {
    return f1_and_cost(reference_spans(s), emitted_spans(s)).second;
  }

  std::vector<int> output_labels(const SearchState& s) const override {
    const auto& inst = detail::as_sequence(*s.instance);
    std::vector<int> labels(static_cast<std::size_t>(inst.length()), bio_outside());
    int p = 0;
    for (ActionId a : s.prefix) {
      if (a == complete_action()) break;
      int m = action_length(a), l = action_type(a);
      if (l != outside_type()) {
        labels[static_cast<std::size_t>(p)] = bio_begin(l);
        for (int i = 1; i < m; ++i) labels[static_cast<std::size_t>(p + i)] = bio_inside(l);
      }
      p += m;
    }
    return labels;
  }

  int horizon(const Instance& x) const override { return detail::as_sequence(x).length() + 1; }

  double max_loss(const Instance& x) const override {
    (void)x;
    return 1.0;
  }

  int covered(const SearchState& s) const {
    int p = 0;
    for (ActionId a : s.prefix)
      if (a != complete_action()) p += action_length(a);
    return p;
  }

  std::vector<ChunkSpan> emitted_spans(const SearchState& s) const {
    std::vector<ChunkSpan> spans;
    int p = 0;
    for (ActionId a : s.prefix) {
      if (a == complete_action()) break;
      int m = action_length(a), l = action_type(a);
      if (l != outside_type()) spans.push_back({p, m, l});
      p += m;
    }
    return spans;
  }

  std::vector<ChunkSpan> reference_spans(const SearchState& s) const {
    const auto& inst = detail::as_sequence(*s.instance);
    if (!inst.has_gold()) throw MissingReference("chunk task: no reference labels");
    return bio_decode(inst.gold);
  }

 private:
  // Whole-chunk meta features of the most recent emission.
  void emit_previous_chunk_features(const SearchState& s,
                                    std::vector<FeatureVector::Entry>& raw) const {
    const auto& inst = detail::as_sequence(*s.instance);
    if (s.prefix.empty()) {
      raw.push_back({config_.hasher.structural("pc=<none>"), 1.0});
      return;
    }
    ActionId last = s.prefix.back();
    int m = action_length(last), l = action_type(last);
    int end = covered(s);
    int start = end - m;
    raw.push_back({config_.hasher.structural("pclen=" + std::to_string(m)), 1.0});
    raw.push_back({config_.hasher.structural("pctype=" + std::to_string(l)), 1.0});
    for (int i = 0; i < m && i < 3; ++i)
      raw.push_back({config_.hasher.structural(
                         "pcw" + std::to_string(i) + "=" +
                         inst.sentence.tokens[static_cast<std::size_t>(start + i)].surface),
                     1.0});
    if (start > 0)
      raw.push_back({config_.hasher.structural(
                         "pcbefore=" + inst.sentence.tokens[static_cast<std::size_t>(start - 1)].surface),
                     1.0});
    if (end < inst.length())
      raw.push_back({config_.hasher.structural(
                         "pcafter=" + inst.sentence.tokens[static_cast<std::size_t>(end)].surface),
                     1.0});
  }

  int type_count_;
  int max_phrase_;
  FeatureConfig config_;
};

// --------------------------------------------------------------------------
// Synthetic data
// --------------------------------------------------------------------------

enum class SynthKind { SeparableSequence, NoisyHistory, Chunked };

struct SynthParams {
  int instances = 100;
  int min_length = 5;
  int max_length = 10;
  int label_count = 3;      // separable_sequence
  double obs_flip = 0.3;    // noisy_history: observation noise
  double reset_prob = 0.15; // noisy_history: fresh-label positions
  int chunk_types = 2;      // chunked
  int max_chunk_length = 3; // chunked
  double outside_prob = 0.3;
};

inline std::vector<SequenceInstance> synth_generate(SynthKind kind, const SynthParams& params,
                                                    RandomStream& rng) {
  std::vector<SequenceInstance> out;
  out.reserve(static_cast<std::size_t>(params.instances));
  for (int idx = 0; idx < params.instances; ++idx) {
    SequenceInstance inst;
    inst.id = idx;
    int n = params.min_length + rng.bounded(params.max_length - params.min_length + 1);
    switch (kind) {
      case SynthKind::SeparableSequence: {
        for (int t = 0; t < n; ++t) {
          int y = rng.bounded(params.label_count);
          Token tok;
          tok.surface = "w" + std::to_string(y) + "_" + std::to_string(rng.bounded(3));
          inst.sentence.tokens.push_back(std::move(tok));
          inst.gold.push_back(y);
        }
        break;
      }
      case SynthKind::NoisyHistory: {
        int prev = 0;
        for (int t = 0; t < n; ++t) {
          bool reset = t == 0 || rng.bernoulli(params.reset_prob);
          int y = reset ? rng.bounded(2) : prev;
          Token tok;
          tok.surface = reset ? "r" : "x";
          int obs = rng.bernoulli(params.obs_flip) ? 1 - y : y;
          tok.attrs.push_back("b" + std::to_string(obs));           // noisy observation
          tok.attrs.push_back(reset ? "c" + std::to_string(y) : "-");  // exact at resets only
          inst.sentence.tokens.push_back(std::move(tok));
          inst.gold.push_back(y);
          prev = y;
        }
        break;
      }
      case SynthKind::Chunked: {
        std::vector<ChunkSpan> spans;
        int p = 0;
        while (p < n) {
          if (rng.bernoulli(params.outside_prob)) {
            Token tok;
            tok.surface = "o_" + std::to_string(rng.bounded(2));
            inst.sentence.tokens.push_back(std::move(tok));
            ++p;
            continue;
          }
          int type = rng.bounded(params.chunk_types);
          int len = 1 + rng.bounded(std::min(params.max_chunk_length, n - p));
          spans.push_back({p, len, type});
          for (int i = 0; i < len; ++i) {
            Token tok;
            tok.surface = "t" + std::to_string(type) + "p" + std::to_string(std::min(i, 2)) + "_" +
                          std::to_string(rng.bounded(2));
            inst.sentence.tokens.push_back(std::move(tok));
          }
          p += len;
        }
        inst.gold = bio_encode(spans, n);
        break;
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// --------------------------------------------------------------------------
// First-order Markov lower-bound simulation
// --------------------------------------------------------------------------
//
// The adversarial distribution is a copy chain over T+1 binary labels.  A
// sequential predictor conditioned on its own previous prediction starts
// correct and flips correctness independently with probability epsilon at
// each subsequent position, so the expected Hamming loss is
//
//   sum_{i=0..T} P(wrong at i) = (T+1)/2 - (1 - (1-2e)^{T+1}) / (4e)
//                              = T/2 - (1 - (1-2e)^{T+1}) / (4e) + 1/2.

struct MarkovLowerBoundSpec {
  double epsilon = 0.1;
  int T = 10;
  int trials = 10000;
};

inline double kaariainen_formula(double epsilon, int T) {
  return static_cast<double>(T) / 2.0 -
         (1.0 - std::pow(1.0 - 2.0 * epsilon, T + 1)) / (4.0 * epsilon) + 0.5;
}

struct LowerBoundResult {
  double measured_mean_hamming = 0.0;
  double formula_value = 0.0;
};

inline LowerBoundResult kaariainen_simulation(const MarkovLowerBoundSpec& spec,
                                              RandomStream& rng) {
  double total = 0.0;
  for (int trial = 0; trial < spec.trials; ++trial) {
    bool wrong = false;
    int loss = 0;
    for (int i = 0; i <= spec.T; ++i) {
      if (i > 0 && rng.bernoulli(spec.epsilon)) wrong = !wrong;
      if (wrong) ++loss;
    }
    total += static_cast<double>(loss);
  }
  return {total / static_cast<double>(spec.trials), kaariainen_formula(spec.epsilon, spec.T)};
}

}  // namespace searn
