#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "textblend/nn.hpp"

namespace textblend {

/// Lowercases, splits punctuation into standalone tokens, then splits on
/// whitespace. Bytes >= 0x80 are treated as word characters so multi-byte
/// UTF-8 sequences stay intact. Throws InputError (quoting the raw text)
/// when nothing survives.
std::vector<std::string> tokenize(const std::string& text);

struct Vocabulary {
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;

  std::vector<std::string> id_to_token;  // starts with "<pad>", "<unk>"
  std::unordered_map<std::string, int> token_to_id;
  std::size_t min_freq = 1;

  std::size_t size() const { return id_to_token.size(); }
  int lookup(const std::string& token) const;
};

/// Ids in descending-frequency order (ties lexicographic) after the two
/// reserved slots; tokens below min_freq are dropped (they map to unk).
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t min_freq);

void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::size_t found = 0;   // vocab tokens present in the file
  double coverage = 0.0;   // found / (vocab size - reserved)
};

/// GloVe-style text file: one "token v1 .. vd" row per line. In-vocab rows
/// are copied; everything else is drawn uniform(-0.1, 0.1); the pad row is
/// zero. Dimension mismatches raise IoError with the line number.
EmbeddingLoadResult load_embeddings(const std::string& path, const Vocabulary& vocab,
                                    std::size_t dim, std::mt19937_64& rng);

struct LabelMap {
  std::vector<std::string> id_to_label;
  std::unordered_map<std::string, int> label_to_id;

  std::size_t size() const { return id_to_label.size(); }
  int id_for(const std::string& label) const;  // InputError when unknown
};

void save_labels(const std::string& path, const LabelMap& labels);
LabelMap load_labels(const std::string& path);

struct CsvSchema {
  int label_col = 0;
  std::vector<int> text_cols = {1};  // joined with a single space
  bool has_header = false;
};

struct TextRecord {
  std::string text;
  int label = 0;
};

struct TextDataset {
  std::vector<TextRecord> records;
  LabelMap labels;
};

/// RFC-4180-ish reader: quoted fields may contain commas, escaped quotes and
/// newlines. Class ids are assigned by first appearance of each label string.
TextDataset read_labeled_csv(const std::string& path, const CsvSchema& schema);
/// Same, but label strings must already exist in `fixed` (evaluation path).
TextDataset read_labeled_csv(const std::string& path, const CsvSchema& schema,
                             const LabelMap& fixed);

struct Example {
  std::vector<int> ids;
  int label = 0;
  std::string text;  // retained for audit
};

/// Tokenize + id-encode every record, truncating to max_tokens.
std::vector<Example> encode_dataset(const TextDataset& dataset, const Vocabulary& vocab,
                                    std::size_t max_tokens);

struct Batch {
  std::size_t size = 0;
  std::size_t max_len = 0;
  std::vector<std::int32_t> ids;        // row-major size x max_len, pad-filled
  std::vector<std::size_t> lengths;     // true (pre-padding) lengths
  std::vector<int> labels;
  std::vector<std::size_t> example_ids; // stable dataset indices
};

/// Shuffles with the given seed, pads each batch to max(its longest example,
/// min_len), keeps the final partial batch.
std::vector<Batch> make_batches(const std::vector<Example>& examples,
                                std::size_t batch_size, std::uint64_t shuffle_seed,
                                std::size_t min_len = 5);

struct CsvRow {
  std::string label;
  std::string text;
};

/// Two-class synthetic corpus: label "pos" rows contain at least one marker
/// token, "neg" rows are pure noise. Linearly separable by construction.
struct SynthSplit {
  std::vector<CsvRow> train;
  std::vector<CsvRow> test;
};

SynthSplit synth_rows(std::size_t n, std::size_t vocab_size, std::uint64_t seed);

/// In-process variant: builds a vocabulary from the train split and returns
/// encoded examples (80/20 split).
struct SynthDataset {
  Vocabulary vocab;
  LabelMap labels;
  std::vector<Example> train;
  std::vector<Example> test;
};

SynthDataset synth_dataset(std::size_t n, std::size_t vocab_size, std::uint64_t seed);

void write_csv(const std::string& path, std::span<const CsvRow> rows);

}  // namespace textblend
