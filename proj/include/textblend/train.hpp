#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textblend/checkpoint.hpp"
#include "textblend/config.hpp"
#include "textblend/data.hpp"
#include "textblend/metrics.hpp"
#include "textblend/models.hpp"

namespace textblend {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Parameters with an
/// untouched (empty) gradient are treated as zero-gradient.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamConfig cfg);

  /// Applies one update in place; throws NumericError naming the parameter
  /// on a non-finite gradient.
  void step();
  void zero_grad();
  std::size_t step_count() const { return step_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<NamedTensor> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  std::size_t step_ = 0;
};

double global_grad_norm(std::span<const NamedTensor> params);
/// Rescales all gradients when their global norm exceeds max_norm.
void clip_grad_norm(std::span<const NamedTensor> params, double max_norm);

/// Deterministic per-purpose RNG stream derived from the run seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t salt);

struct DataBundle {
  Vocabulary vocab;
  LabelMap labels;
  std::vector<Example> train;
  std::vector<Example> test;
};

/// Loads vocab, label map and both CSV splits per the config. All files
/// must already exist (build-vocab creates the first two).
DataBundle load_data(const RunConfig& cfg);

/// Reads the train CSV, builds vocabulary and label map, writes both files.
struct VocabSummary {
  std::size_t vocab_size = 0;
  std::size_t classes = 0;
  std::size_t examples = 0;
};
VocabSummary build_vocab_artifacts(const RunConfig& cfg);

/// Per-example teacher posteriors for both splits, fingerprinted against
/// the checkpoint file they were computed from.
struct TeacherCache {
  std::string fingerprint;
  std::size_t classes = 0;
  std::vector<std::vector<double>> train_probs;  // indexed by example id
  std::vector<std::vector<double>> test_probs;
};

void save_teacher_cache(const std::string& path, const TeacherCache& cache);
TeacherCache load_teacher_cache(const std::string& path);

/// Checks fingerprint, class count and row counts against the artifacts a
/// student run will consume; throws ConfigError when stale.
void require_cache_fresh(const TeacherCache& cache, const std::string& teacher_ckpt,
                         std::size_t classes, std::size_t train_n, std::size_t test_n);

MetricsReport train_teacher(const RunConfig& cfg);
TeacherCache cache_teacher_predictions(const RunConfig& cfg);

enum class StudentMode { baseline, blended };

MetricsReport train_student(const RunConfig& cfg, StudentMode mode);

MetricsReport evaluate_checkpoint(const RunConfig& cfg, const std::string& ckpt_path);
MetricsReport evaluate_ensemble(const RunConfig& cfg, const std::string& teacher_ckpt,
                                const std::string& student_ckpt, double gamma);

std::string metrics_path(const RunConfig& cfg, const std::string& stem);

}  // namespace textblend
