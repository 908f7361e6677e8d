#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "textblend/data.hpp"
#include "textblend/nn.hpp"

namespace textblend {

struct TeacherHyper {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 300;
  std::size_t hidden = 256;
  std::size_t classes = 2;
  double dropout = 0.5;
};

/// Bidirectional-LSTM classifier: embedding, one LSTM per direction, linear
/// head over the concatenated final hidden states.
struct TeacherModel {
  EmbeddingTable embedding;
  LstmParams fwd;
  LstmParams bwd;
  Tensor head_w;  // [classes x 2*hidden]
  Tensor head_b;  // [classes]
  double dropout_rate = 0.5;
  std::size_t classes = 0;
};

/// Max-over-time CNN classifier: embedding, one filter bank per width,
/// linear head over the concatenated pooled features.
struct StudentHyper {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 300;
  std::vector<std::size_t> filter_widths = {3, 4, 5};
  std::size_t filters_per_width = 100;
  std::size_t classes = 2;
  double dropout = 0.5;
};

struct StudentModel {
  EmbeddingTable embedding;
  std::vector<ConvFilterBank> banks;
  Tensor head_w;  // [classes x sum(counts)]
  Tensor head_b;  // [classes]
  double dropout_rate = 0.5;
  std::size_t classes = 0;

  std::size_t max_filter_width() const;
};

TeacherModel make_teacher(const TeacherHyper& hyper, std::mt19937_64& rng);
StudentModel make_student(const StudentHyper& hyper, std::mt19937_64& rng);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Trainable parameters in a stable, documented order.
std::vector<NamedTensor> parameters(const TeacherModel& model);
std::vector<NamedTensor> parameters(const StudentModel& model);
std::size_t parameter_count(std::span<const NamedTensor> params);

/// Logits [batch x classes]. Training mode applies dropout (embedding and
/// encoded state for the teacher, pooled features for the student) and
/// draws from `rng`; eval mode never touches it.
Tensor teacher_forward(const TeacherModel& model, const Batch& batch, bool training,
                       std::mt19937_64* rng);
Tensor student_forward(const StudentModel& model, const Batch& batch, bool training,
                       std::mt19937_64* rng);

enum class Provenance { teacher, student, ensemble };

struct ClassDistribution {
  std::vector<double> probs;
  Provenance provenance = Provenance::teacher;
};

/// Eval-mode posteriors, one distribution per example.
std::vector<ClassDistribution> teacher_predict(const TeacherModel& model, const Batch& batch);
std::vector<ClassDistribution> student_predict(const StudentModel& model, const Batch& batch);

/// gamma * teacher + (1 - gamma) * student.
ClassDistribution ensemble(const ClassDistribution& teacher, const ClassDistribution& student,
                           double gamma);

/// -log q[label] for a finished distribution (evaluation-side).
double cross_entropy_hard(const ClassDistribution& q, std::size_t label);

/// Mean over the batch of -log softmax(logits)[i, label_i]; log-sum-exp
/// path, differentiable through the logits.
Tensor cross_entropy_hard(const Tensor& logits, std::span<const int> labels);

/// Mean over the batch of -sum_c p[i,c] * log softmax(logits)[i,c]. The
/// teacher rows are plain numbers, so no gradient can reach the teacher.
/// temperature != 1 sharpens/softens both sides (default leaves them alone).
Tensor cross_entropy_soft(const Tensor& logits, std::span<const double> teacher_rows,
                          double temperature = 1.0);

struct BlendConfig {
  double lambda = 0.5;       // soft-loss weight
  double gamma = 0.4;        // ensemble weight (evaluation only)
  double temperature = 1.0;  // soft-target temperature

  void validate() const;
};

/// lambda * soft + (1 - lambda) * hard, both mean-reduced over the batch.
Tensor blended_loss(const BlendConfig& cfg, std::span<const double> teacher_rows,
                    const Tensor& logits, std::span<const int> labels);

std::size_t argmax_class(std::span<const double> probs);  // ties: lowest index

}  // namespace textblend
