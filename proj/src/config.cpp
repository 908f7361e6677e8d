#include "textblend/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace textblend {

using nlohmann::json;

namespace {

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  auto it = root.find(name);
  return it == root.end() ? empty : *it;
}

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) {
      throw ConfigError("unknown config key \"" + where + "." + it.key() + "\"");
    }
  }
}

template <class T>
void take(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path);
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw ConfigError(origin + ": malformed JSON");
  if (!root.is_object()) throw ConfigError(origin + ": config root must be an object");
  reject_unknown(root, origin, {"data", "model", "train", "bench", "paths"});

  RunConfig cfg;

  const json& data = section(root, "data");
  reject_unknown(data, "data",
                 {"train_csv", "test_csv", "label_col", "text_cols", "has_header",
                  "max_tokens", "min_freq", "embeddings_path"});
  take(data, "train_csv", cfg.train_csv);
  take(data, "test_csv", cfg.test_csv);
  take(data, "label_col", cfg.label_col);
  take(data, "text_cols", cfg.text_cols);
  take(data, "has_header", cfg.has_header);
  take(data, "max_tokens", cfg.max_tokens);
  take(data, "min_freq", cfg.min_freq);
  take(data, "embeddings_path", cfg.embeddings_path);

  const json& model = section(root, "model");
  reject_unknown(model, "model",
                 {"embedding_dim", "hidden", "filters_per_width", "filter_widths",
                  "dropout"});
  take(model, "embedding_dim", cfg.embedding_dim);
  take(model, "hidden", cfg.hidden);
  take(model, "filters_per_width", cfg.filters_per_width);
  take(model, "filter_widths", cfg.filter_widths);
  take(model, "dropout", cfg.dropout);

  const json& train = section(root, "train");
  reject_unknown(train, "train",
                 {"epochs", "batch_size", "learning_rate", "seed", "lambda", "gamma",
                  "temperature", "clip_norm"});
  take(train, "epochs", cfg.epochs);
  take(train, "batch_size", cfg.batch_size);
  take(train, "learning_rate", cfg.learning_rate);
  take(train, "seed", cfg.seed);
  take(train, "lambda", cfg.lambda);
  take(train, "gamma", cfg.gamma);
  take(train, "temperature", cfg.temperature);
  take(train, "clip_norm", cfg.clip_norm);

  const json& bench = section(root, "bench");
  reject_unknown(bench, "bench",
                 {"seq_len", "batch", "warmup", "iters", "reps", "cnn_workers"});
  take(bench, "seq_len", cfg.bench_seq_len);
  take(bench, "batch", cfg.bench_batch);
  take(bench, "warmup", cfg.bench_warmup);
  take(bench, "iters", cfg.bench_iters);
  take(bench, "reps", cfg.bench_reps);
  take(bench, "cnn_workers", cfg.bench_cnn_workers);

  const json& paths = section(root, "paths");
  reject_unknown(paths, "paths",
                 {"out_dir", "vocab", "labels", "teacher_checkpoint",
                  "student_checkpoint", "teacher_cache"});
  take(paths, "out_dir", cfg.out_dir);
  take(paths, "vocab", cfg.vocab_path);
  take(paths, "labels", cfg.labels_path);
  take(paths, "teacher_checkpoint", cfg.teacher_checkpoint);
  take(paths, "student_checkpoint", cfg.student_checkpoint);
  take(paths, "teacher_cache", cfg.teacher_cache);

  return cfg;
}

void RunConfig::resolve_paths() {
  auto fill = [&](std::string& path, const char* name) {
    if (path.empty()) path = (std::filesystem::path(out_dir) / name).string();
  };
  fill(vocab_path, "vocab.txt");
  fill(labels_path, "labels.txt");
  fill(teacher_checkpoint, "teacher.ckpt");
  fill(student_checkpoint, "student.ckpt");
  fill(teacher_cache, "teacher_cache.txt");
}

void RunConfig::validate() const {
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("train.lambda " + std::to_string(lambda) + " outside [0, 1]");
  if (gamma < 0.0 || gamma > 1.0)
    throw ConfigError("train.gamma " + std::to_string(gamma) + " outside [0, 1]");
  if (temperature <= 0.0) throw ConfigError("train.temperature must be > 0");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("model.dropout " + std::to_string(dropout) + " outside [0, 1)");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (embedding_dim == 0) throw ConfigError("model.embedding_dim must be >= 1");
  if (hidden == 0) throw ConfigError("model.hidden must be >= 1");
  if (filters_per_width == 0) throw ConfigError("model.filters_per_width must be >= 1");
  if (filter_widths.empty()) throw ConfigError("model.filter_widths must be nonempty");
  for (std::size_t w : filter_widths)
    if (w == 0) throw ConfigError("model.filter_widths entries must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("train.learning_rate must be >= 0");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
  if (label_col < 0) throw ConfigError("data.label_col must be >= 0");
  for (int c : text_cols)
    if (c < 0) throw ConfigError("data.text_cols entries must be >= 0");
  if (text_cols.empty()) throw ConfigError("data.text_cols must be nonempty");
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!std::filesystem::exists(path)) throw ConfigError(what + " not found: " + path);
}

}  // namespace textblend
