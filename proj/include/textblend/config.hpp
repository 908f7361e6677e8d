#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "textblend/error.hpp"

namespace textblend {

/// One declarative config drives every command; CLI flags override fields.
/// Unknown keys are rejected so typos fail loudly.
struct RunConfig {
  // data
  std::string train_csv;
  std::string test_csv;
  int label_col = 0;
  std::vector<int> text_cols = {1};
  bool has_header = false;
  std::size_t max_tokens = 400;
  std::size_t min_freq = 1;
  std::string embeddings_path;  // optional GloVe-style file

  // model
  std::size_t embedding_dim = 300;
  std::size_t hidden = 256;
  std::size_t filters_per_width = 100;
  std::vector<std::size_t> filter_widths = {3, 4, 5};
  double dropout = 0.5;

  // training
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  double lambda = 0.5;
  double gamma = 0.4;
  double temperature = 1.0;
  double clip_norm = 5.0;  // teacher only; 0 disables

  // bench
  std::size_t bench_seq_len = 200;
  std::size_t bench_batch = 64;
  std::size_t bench_warmup = 5;
  std::size_t bench_iters = 30;
  std::size_t bench_reps = 3;
  std::size_t bench_cnn_workers = 0;

  // artifact paths (resolved against out_dir when relative and unset)
  std::string out_dir = "run";
  std::string vocab_path;
  std::string labels_path;
  std::string teacher_checkpoint;
  std::string student_checkpoint;
  std::string teacher_cache;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text, const std::string& origin);

  /// Fills unset artifact paths with defaults under out_dir.
  void resolve_paths();
  /// Range checks shared by every command.
  void validate() const;
};

void require_file(const std::string& path, const std::string& what);

}  // namespace textblend
