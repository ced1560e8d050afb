#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "searn/errors.hpp"
#include "searn/tasks.hpp"

namespace searn {

// Column-format corpus: one token per row, whitespace-separated fields,
// blank lines between sentences.  Every row of a sentence must have the
// same column count; the last schema column is the label when present.
struct ConllSchema {
  std::vector<std::string> columns;  // e.g. {"token", "pos", "label"}

  bool has_labels() const { return !columns.empty() && columns.back() == "label"; }
  int column_count() const { return static_cast<int>(columns.size()); }
};

struct ConllSentence {
  std::vector<std::vector<std::string>> rows;  // tokens x columns
};

struct ConllDataset {
  ConllSchema schema;
  std::vector<ConllSentence> sentences;
};

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string field;
  while (ss >> field) out.push_back(std::move(field));
  return out;
}

inline ConllDataset read_conll(const std::string& path, const ConllSchema& schema) {
  std::ifstream in(path);
  if (!in) throw EmptyFile("cannot open " + path);
  ConllDataset data;
  data.schema = schema;
  ConllSentence current;
  std::string line;
  int line_number = 0;
  bool saw_content = false;
  while (std::getline(in, line)) {
    ++line_number;
    std::vector<std::string> fields = split_fields(line);
    if (fields.empty()) {
      if (!current.rows.empty()) {
        data.sentences.push_back(std::move(current));
        current = ConllSentence{};
      }
      continue;
    }
    saw_content = true;
    if (static_cast<int>(fields.size()) != schema.column_count())
      throw MalformedRow("line " + std::to_string(line_number) + ": expected " +
                             std::to_string(schema.column_count()) + " columns, got " +
                             std::to_string(fields.size()),
                         line_number);
    current.rows.push_back(std::move(fields));
  }
  if (!current.rows.empty()) data.sentences.push_back(std::move(current));
  if (!saw_content) throw EmptyFile(path + " has no token rows");
  return data;
}

inline void write_conll(const std::string& path, const ConllDataset& data) {
  std::ofstream out(path + ".tmp");
  for (std::size_t i = 0; i < data.sentences.size(); ++i) {
    for (const auto& row : data.sentences[i].rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ' ';
        out << row[c];
      }
      out << '\n';
    }
    out << '\n';
  }
  out.close();
  std::rename((path + ".tmp").c_str(), path.c_str());
}

inline ConllSchema infer_schema(int column_count) {
  switch (column_count) {
    case 1:
      return ConllSchema{{"token"}};
    case 2:
      return ConllSchema{{"token", "label"}};
    case 3:
      return ConllSchema{{"token", "pos", "label"}};
    default: {
      ConllSchema s;
      s.columns.push_back("token");
      for (int i = 0; i < column_count - 2; ++i) s.columns.push_back("attr" + std::to_string(i));
      s.columns.push_back("label");
      return s;
    }
  }
}

// Convert parsed rows into task instances.  Labels intern into `labels`
// (plain sequence labels) when encode_bio is false, otherwise they parse as
// BIO tags over the `labels` type vocabulary.
inline std::vector<SequenceInstance> build_instances(const ConllDataset& data, LabelVocab& labels,
                                                     bool encode_bio) {
  int token_col = -1, label_col = -1;
  for (int c = 0; c < data.schema.column_count(); ++c) {
    if (data.schema.columns[static_cast<std::size_t>(c)] == "token") token_col = c;
    if (data.schema.columns[static_cast<std::size_t>(c)] == "label") label_col = c;
  }
  if (token_col < 0) token_col = 0;
  std::vector<SequenceInstance> out;
  out.reserve(data.sentences.size());
  int id = 0;
  for (const auto& sent : data.sentences) {
    SequenceInstance inst;
    inst.id = id++;
    for (const auto& row : sent.rows) {
      Token tok;
      tok.surface = row[static_cast<std::size_t>(token_col)];
      for (int c = 0; c < static_cast<int>(row.size()); ++c) {
        if (c == token_col || c == label_col) continue;
        tok.attrs.push_back(row[static_cast<std::size_t>(c)]);
      }
      inst.sentence.tokens.push_back(std::move(tok));
      if (label_col >= 0) {
        const std::string& name = row[static_cast<std::size_t>(label_col)];
        inst.gold.push_back(encode_bio ? bio_tag_from_name(name, labels) : labels.intern(name));
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// Serialize predictions next to the input columns (label column replaced or
// appended).
inline ConllDataset with_labels(const ConllDataset& input,
                                const std::vector<std::vector<std::string>>& labels) {
  if (labels.size() != input.sentences.size())
    throw LengthMismatch("with_labels: sentence count mismatch");
  ConllDataset out = input;
  bool had_label = out.schema.has_labels();
  if (!had_label) out.schema.columns.push_back("label");
  for (std::size_t i = 0; i < out.sentences.size(); ++i) {
    auto& sent = out.sentences[i];
    if (labels[i].size() != sent.rows.size())
      throw LengthMismatch("with_labels: token count mismatch in sentence " + std::to_string(i));
    for (std::size_t t = 0; t < sent.rows.size(); ++t) {
      if (had_label)
        sent.rows[t].back() = labels[i][t];
      else
        sent.rows[t].push_back(labels[i][t]);
    }
  }
  return out;
}

}  // namespace searn
