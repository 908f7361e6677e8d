#include "textblend/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace textblend {

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (is_word_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      // punctuation becomes its own token
      flush();
      tokens.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  if (tokens.empty()) {
    throw InputError("tokenize: no tokens in \"" + text + "\"");
  }
  return tokens;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? unk_id : it->second;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& sentence : corpus)
    for (const auto& token : sentence) ++freq[token];

  std::vector<std::pair<std::string, std::size_t>> kept;
  kept.reserve(freq.size());
  for (auto& [token, count] : freq)
    if (count >= min_freq) kept.emplace_back(token, count);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.min_freq = min_freq;
  vocab.id_to_token = {"<pad>", "<unk>"};
  for (auto& [token, count] : kept) vocab.id_to_token.push_back(token);
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);
  return vocab;
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ostringstream out;
  out << "textblend-vocab v1\n";
  out << "min_freq " << vocab.min_freq << "\n";
  for (std::size_t i = 2; i < vocab.id_to_token.size(); ++i)
    out << vocab.id_to_token[i] << "\n";
  write_file(path, out.str());
}

Vocabulary load_vocab(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "textblend-vocab v1") {
    throw IoError(path + ": not a vocabulary file");
  }
  Vocabulary vocab;
  if (!std::getline(in, line) || line.rfind("min_freq ", 0) != 0) {
    throw IoError(path + ": missing min_freq header");
  }
  vocab.min_freq = std::stoul(line.substr(9));
  vocab.id_to_token = {"<pad>", "<unk>"};
  while (std::getline(in, line)) {
    if (!line.empty()) vocab.id_to_token.push_back(line);
  }
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);
  return vocab;
}

EmbeddingLoadResult load_embeddings(const std::string& path, const Vocabulary& vocab,
                                    std::size_t dim, std::mt19937_64& rng) {
  EmbeddingLoadResult result;
  result.table = make_embedding(vocab.size(), dim, Vocabulary::pad_id, rng);

  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  auto data = result.table.weights.data();
  std::vector<bool> seen(vocab.size(), false);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    std::vector<double> values;
    values.reserve(dim);
    double v;
    while (row >> v) values.push_back(v);
    if (values.size() != dim) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(dim) + " values, got " +
                    std::to_string(values.size()));
    }
    auto it = vocab.token_to_id.find(token);
    if (it == vocab.token_to_id.end()) continue;
    const auto id = static_cast<std::size_t>(it->second);
    if (id == Vocabulary::pad_id || seen[id]) continue;
    seen[id] = true;
    ++result.found;
    std::copy(values.begin(), values.end(), data.begin() + static_cast<std::ptrdiff_t>(id * dim));
  }
  const std::size_t real_tokens = vocab.size() > 2 ? vocab.size() - 2 : 1;
  result.coverage = static_cast<double>(result.found) / static_cast<double>(real_tokens);
  return result;
}

int LabelMap::id_for(const std::string& label) const {
  auto it = label_to_id.find(label);
  if (it == label_to_id.end()) {
    throw InputError("unknown label \"" + label + "\" not in persisted label map");
  }
  return it->second;
}

void save_labels(const std::string& path, const LabelMap& labels) {
  std::ostringstream out;
  for (std::size_t i = 0; i < labels.id_to_label.size(); ++i)
    out << i << "\t" << labels.id_to_label[i] << "\n";
  write_file(path, out.str());
}

LabelMap load_labels(const std::string& path) {
  std::istringstream in(read_file(path));
  LabelMap labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError(path + ": malformed label line");
    labels.id_to_label.push_back(line.substr(tab + 1));
  }
  for (std::size_t i = 0; i < labels.id_to_label.size(); ++i)
    labels.label_to_id[labels.id_to_label[i]] = static_cast<int>(i);
  return labels;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    fields.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A lone newline yields one empty field; skip such blank rows.
    if (!(fields.size() == 1 && fields[0].empty())) records.push_back(fields);
    fields.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) {
    throw IoError(path + ": row " + std::to_string(records.size() + 1) +
                  ": unterminated quoted field");
  }
  if (field_started || !fields.empty()) end_record();
  return records;
}

TextDataset read_csv_impl(const std::string& path, const CsvSchema& schema,
                          const LabelMap* fixed) {
  auto records = parse_csv(path);
  TextDataset dataset;
  if (fixed) dataset.labels = *fixed;

  int max_col = schema.label_col;
  for (int c : schema.text_cols) max_col = std::max(max_col, c);

  std::size_t row_no = 0;
  for (const auto& record : records) {
    ++row_no;
    if (schema.has_header && row_no == 1) continue;
    if (static_cast<int>(record.size()) <= max_col) {
      throw IoError(path + ": row " + std::to_string(row_no) + ": expected at least " +
                    std::to_string(max_col + 1) + " columns, got " +
                    std::to_string(record.size()));
    }
    const std::string& label = record[static_cast<std::size_t>(schema.label_col)];
    int label_id;
    if (fixed) {
      label_id = dataset.labels.id_for(label);
    } else {
      auto it = dataset.labels.label_to_id.find(label);
      if (it == dataset.labels.label_to_id.end()) {
        label_id = static_cast<int>(dataset.labels.id_to_label.size());
        dataset.labels.id_to_label.push_back(label);
        dataset.labels.label_to_id[label] = label_id;
      } else {
        label_id = it->second;
      }
    }
    std::string text;
    for (std::size_t i = 0; i < schema.text_cols.size(); ++i) {
      if (i) text += ' ';
      text += record[static_cast<std::size_t>(schema.text_cols[i])];
    }
    dataset.records.push_back({std::move(text), label_id});
  }
  return dataset;
}

}  // namespace

TextDataset read_labeled_csv(const std::string& path, const CsvSchema& schema) {
  return read_csv_impl(path, schema, nullptr);
}

TextDataset read_labeled_csv(const std::string& path, const CsvSchema& schema,
                             const LabelMap& fixed) {
  return read_csv_impl(path, schema, &fixed);
}

std::vector<Example> encode_dataset(const TextDataset& dataset, const Vocabulary& vocab,
                                    std::size_t max_tokens) {
  std::vector<Example> examples;
  examples.reserve(dataset.records.size());
  for (const auto& record : dataset.records) {
    auto tokens = tokenize(record.text);
    if (tokens.size() > max_tokens) tokens.resize(max_tokens);
    Example ex;
    ex.ids.reserve(tokens.size());
    for (const auto& token : tokens) ex.ids.push_back(vocab.lookup(token));
    ex.label = record.label;
    ex.text = record.text;
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<Batch> make_batches(const std::vector<Example>& examples,
                                std::size_t batch_size, std::uint64_t shuffle_seed,
                                std::size_t min_len) {
  if (batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    Batch batch;
    batch.size = end - start;
    batch.max_len = min_len;
    for (std::size_t i = start; i < end; ++i)
      batch.max_len = std::max(batch.max_len, examples[order[i]].ids.size());
    batch.ids.assign(batch.size * batch.max_len, Vocabulary::pad_id);
    for (std::size_t i = start; i < end; ++i) {
      const Example& ex = examples[order[i]];
      const std::size_t row = i - start;
      for (std::size_t t = 0; t < ex.ids.size(); ++t)
        batch.ids[row * batch.max_len + t] = static_cast<std::int32_t>(ex.ids[t]);
      batch.lengths.push_back(ex.ids.size());
      batch.labels.push_back(ex.label);
      batch.example_ids.push_back(order[i]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

namespace {

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

}  // namespace

void write_csv(const std::string& path, std::span<const CsvRow> rows) {
  std::ostringstream out;
  for (const auto& row : rows)
    out << csv_quote(row.label) << "," << csv_quote(row.text) << "\n";
  write_file(path, out.str());
}

SynthSplit synth_rows(std::size_t n, std::size_t vocab_size, std::uint64_t seed) {
  if (n < 2) throw ConfigError("synth_rows: need at least 2 examples");
  if (vocab_size < 2) throw ConfigError("synth_rows: vocab_size must be >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len_dist(5, 15);
  std::uniform_int_distribution<std::size_t> noise_dist(0, vocab_size - 1);
  std::uniform_int_distribution<int> marker_count_dist(1, 2);
  std::uniform_int_distribution<int> marker_kind_dist(0, 1);
  std::bernoulli_distribution positive(0.5);
  static const char* kMarkers[2] = {"marka", "markb"};

  std::vector<CsvRow> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = len_dist(rng);
    std::vector<std::string> tokens;
    tokens.reserve(len);
    for (std::size_t t = 0; t < len; ++t)
      tokens.push_back("w" + std::to_string(noise_dist(rng)));
    const bool pos = positive(rng);
    if (pos) {
      const int markers = marker_count_dist(rng);
      for (int m = 0; m < markers; ++m) {
        std::uniform_int_distribution<std::size_t> pos_dist(0, tokens.size() - 1);
        tokens[pos_dist(rng)] = kMarkers[marker_kind_dist(rng)];
      }
    }
    std::string text;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t) text += ' ';
      text += tokens[t];
    }
    rows.push_back({pos ? "pos" : "neg", std::move(text)});
  }

  const std::size_t train_n = (n * 8) / 10;
  SynthSplit split;
  split.train.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(train_n));
  split.test.assign(rows.begin() + static_cast<std::ptrdiff_t>(train_n), rows.end());
  return split;
}

SynthDataset synth_dataset(std::size_t n, std::size_t vocab_size, std::uint64_t seed) {
  SynthSplit split = synth_rows(n, vocab_size, seed);
  SynthDataset out;

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(split.train.size());
  for (const auto& row : split.train) corpus.push_back(tokenize(row.text));
  out.vocab = build_vocab(corpus, 1);

  auto to_dataset = [&](const std::vector<CsvRow>& rows, bool grow) {
    TextDataset ds;
    ds.labels = out.labels;
    for (const auto& row : rows) {
      int id;
      auto it = ds.labels.label_to_id.find(row.label);
      if (it != ds.labels.label_to_id.end()) {
        id = it->second;
      } else if (grow) {
        id = static_cast<int>(ds.labels.id_to_label.size());
        ds.labels.id_to_label.push_back(row.label);
        ds.labels.label_to_id[row.label] = id;
      } else {
        id = ds.labels.id_for(row.label);
      }
      ds.records.push_back({row.text, id});
    }
    return ds;
  };

  TextDataset train_ds = to_dataset(split.train, true);
  out.labels = train_ds.labels;
  TextDataset test_ds = to_dataset(split.test, false);

  out.train = encode_dataset(train_ds, out.vocab, 400);
  out.test = encode_dataset(test_ds, out.vocab, 400);
  return out;
}

}  // namespace textblend
