#include "textblend/models.hpp"

#include <algorithm>
#include <cmath>

namespace textblend {

std::size_t StudentModel::max_filter_width() const {
  std::size_t w = 1;
  for (const auto& bank : banks) w = std::max(w, bank.width);
  return w;
}

TeacherModel make_teacher(const TeacherHyper& hyper, std::mt19937_64& rng) {
  TeacherModel m;
  m.embedding = make_embedding(hyper.vocab_size, hyper.embedding_dim,
                               Vocabulary::pad_id, rng);
  m.fwd = make_lstm(hyper.embedding_dim, hyper.hidden, rng);
  m.bwd = make_lstm(hyper.embedding_dim, hyper.hidden, rng);
  const std::size_t head_in = 2 * hyper.hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(head_in));
  m.head_w = Tensor::uniform({hyper.classes, head_in}, -bound, bound, rng);
  m.head_w.set_requires_grad(true);
  m.head_b = Tensor::zeros({hyper.classes});
  m.head_b.set_requires_grad(true);
  m.dropout_rate = hyper.dropout;
  m.classes = hyper.classes;
  return m;
}

StudentModel make_student(const StudentHyper& hyper, std::mt19937_64& rng) {
  StudentModel m;
  m.embedding = make_embedding(hyper.vocab_size, hyper.embedding_dim,
                               Vocabulary::pad_id, rng);
  std::size_t head_in = 0;
  for (std::size_t width : hyper.filter_widths) {
    m.banks.push_back(make_conv_bank(width, hyper.filters_per_width,
                                     hyper.embedding_dim, rng));
    head_in += hyper.filters_per_width;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(head_in));
  m.head_w = Tensor::uniform({hyper.classes, head_in}, -bound, bound, rng);
  m.head_w.set_requires_grad(true);
  m.head_b = Tensor::zeros({hyper.classes});
  m.head_b.set_requires_grad(true);
  m.dropout_rate = hyper.dropout;
  m.classes = hyper.classes;
  return m;
}

namespace {

void push_lstm(std::vector<NamedTensor>& out, const std::string& prefix,
               const LstmParams& p) {
  out.push_back({prefix + ".w_f", p.w_f});
  out.push_back({prefix + ".w_i", p.w_i});
  out.push_back({prefix + ".w_o", p.w_o});
  out.push_back({prefix + ".w_c", p.w_c});
  out.push_back({prefix + ".u_f", p.u_f});
  out.push_back({prefix + ".u_i", p.u_i});
  out.push_back({prefix + ".u_o", p.u_o});
  out.push_back({prefix + ".u_c", p.u_c});
  out.push_back({prefix + ".b_f", p.b_f});
  out.push_back({prefix + ".b_i", p.b_i});
  out.push_back({prefix + ".b_o", p.b_o});
  out.push_back({prefix + ".b_c", p.b_c});
}

}  // namespace

std::vector<NamedTensor> parameters(const TeacherModel& model) {
  std::vector<NamedTensor> out;
  out.push_back({"embedding.weights", model.embedding.weights});
  push_lstm(out, "fwd", model.fwd);
  push_lstm(out, "bwd", model.bwd);
  out.push_back({"head.w", model.head_w});
  out.push_back({"head.b", model.head_b});
  return out;
}

std::vector<NamedTensor> parameters(const StudentModel& model) {
  std::vector<NamedTensor> out;
  out.push_back({"embedding.weights", model.embedding.weights});
  for (std::size_t i = 0; i < model.banks.size(); ++i) {
    out.push_back({"banks." + std::to_string(i) + ".kernels", model.banks[i].kernels});
    out.push_back({"banks." + std::to_string(i) + ".bias", model.banks[i].bias});
  }
  out.push_back({"head.w", model.head_w});
  out.push_back({"head.b", model.head_b});
  return out;
}

std::size_t parameter_count(std::span<const NamedTensor> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

Tensor teacher_forward(const TeacherModel& model, const Batch& batch, bool training,
                       std::mt19937_64* rng) {
  if (training && !rng) throw UsageError("teacher_forward: training mode needs an rng");
  Tensor embedded = embed_batch(model.embedding, batch.ids, batch.size, batch.max_len);
  if (training) embedded = dropout(embedded, model.dropout_rate, true, *rng);
  Tensor encoded = bilstm_encode(model.fwd, model.bwd, embedded, batch.lengths);
  if (training) encoded = dropout(encoded, model.dropout_rate, true, *rng);
  return linear(encoded, model.head_w, model.head_b);
}

Tensor student_forward(const StudentModel& model, const Batch& batch, bool training,
                       std::mt19937_64* rng) {
  if (training && !rng) throw UsageError("student_forward: training mode needs an rng");
  Tensor embedded = embed_batch(model.embedding, batch.ids, batch.size, batch.max_len);

  // Conv windows may run over the pad that lifts short sentences to the
  // widest filter; those pad rows are zero by construction.
  const std::size_t min_len = model.max_filter_width();
  std::vector<std::size_t> eff_lengths(batch.lengths.begin(), batch.lengths.end());
  for (auto& l : eff_lengths) l = std::max(l, min_len);

  std::vector<Tensor> pooled;
  pooled.reserve(model.banks.size());
  for (const auto& bank : model.banks)
    pooled.push_back(conv_text(bank, embedded, eff_lengths));
  Tensor features = concat(pooled, 1);
  if (training) features = dropout(features, model.dropout_rate, true, *rng);
  return linear(features, model.head_w, model.head_b);
}

namespace {

std::vector<ClassDistribution> rows_to_distributions(const Tensor& probs,
                                                     Provenance provenance) {
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  std::vector<ClassDistribution> out(n);
  auto data = probs.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].provenance = provenance;
    out[i].probs.assign(data.begin() + static_cast<std::ptrdiff_t>(i * k),
                        data.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  }
  return out;
}

}  // namespace

std::vector<ClassDistribution> teacher_predict(const TeacherModel& model,
                                               const Batch& batch) {
  NoGrad guard;
  Tensor probs = softmax(teacher_forward(model, batch, false, nullptr));
  return rows_to_distributions(probs, Provenance::teacher);
}

std::vector<ClassDistribution> student_predict(const StudentModel& model,
                                               const Batch& batch) {
  NoGrad guard;
  Tensor probs = softmax(student_forward(model, batch, false, nullptr));
  return rows_to_distributions(probs, Provenance::student);
}

ClassDistribution ensemble(const ClassDistribution& teacher,
                           const ClassDistribution& student, double gamma) {
  if (teacher.probs.size() != student.probs.size()) {
    throw DimensionError("ensemble: class counts differ (" +
                         std::to_string(teacher.probs.size()) + " vs " +
                         std::to_string(student.probs.size()) + ")");
  }
  if (gamma < 0.0 || gamma > 1.0) {
    throw ConfigError("ensemble: gamma " + std::to_string(gamma) + " outside [0, 1]");
  }
  ClassDistribution out;
  out.provenance = Provenance::ensemble;
  out.probs.resize(teacher.probs.size());
  if (gamma == 1.0) {
    out.probs = teacher.probs;
  } else if (gamma == 0.0) {
    out.probs = student.probs;
  } else {
    for (std::size_t c = 0; c < out.probs.size(); ++c)
      out.probs[c] = gamma * teacher.probs[c] + (1.0 - gamma) * student.probs[c];
  }
  return out;
}

double cross_entropy_hard(const ClassDistribution& q, std::size_t label) {
  if (label >= q.probs.size()) {
    throw InputError("cross_entropy_hard: label " + std::to_string(label) +
                     " out of range for " + std::to_string(q.probs.size()) + " classes");
  }
  return -std::log(q.probs[label]);
}

Tensor cross_entropy_hard(const Tensor& logits, std::span<const int> labels) {
  Tensor logq = log_softmax(logits);
  Tensor picked = pick(logq, labels);
  return mul_scalar(mean_all(picked), -1.0);
}

namespace {

void require_teacher_rows(const Tensor& logits, std::span<const double> teacher_rows) {
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (teacher_rows.size() != n * k) {
    throw DimensionError("cross_entropy_soft: teacher rows hold " +
                         std::to_string(teacher_rows.size()) + " values, want " +
                         std::to_string(n * k));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = teacher_rows[i * k + c];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw InputError("cross_entropy_soft: teacher row " + std::to_string(i) +
                         " is not a distribution");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw InputError("cross_entropy_soft: teacher row " + std::to_string(i) +
                       " sums to " + std::to_string(sum));
    }
  }
}

std::vector<double> temper_rows(std::span<const double> rows, std::size_t n,
                                std::size_t k, double temperature) {
  std::vector<double> out(rows.begin(), rows.end());
  if (temperature == 1.0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double& p = out[i * k + c];
      p = std::pow(p, 1.0 / temperature);
      sum += p;
    }
    for (std::size_t c = 0; c < k; ++c) out[i * k + c] /= sum;
  }
  return out;
}

}  // namespace

Tensor cross_entropy_soft(const Tensor& logits, std::span<const double> teacher_rows,
                          double temperature) {
  require_teacher_rows(logits, teacher_rows);
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  Tensor scaled = temperature == 1.0 ? logits : mul_scalar(logits, 1.0 / temperature);
  Tensor logq = log_softmax(scaled);
  Tensor targets = Tensor::from({n, k}, temper_rows(teacher_rows, n, k, temperature));
  Tensor weighted = mul(targets, logq);
  return mul_scalar(sum_all(weighted), -1.0 / static_cast<double>(n));
}

void BlendConfig::validate() const {
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("lambda " + std::to_string(lambda) + " outside [0, 1]");
  if (gamma < 0.0 || gamma > 1.0)
    throw ConfigError("gamma " + std::to_string(gamma) + " outside [0, 1]");
  if (temperature <= 0.0)
    throw ConfigError("temperature " + std::to_string(temperature) + " must be > 0");
}

Tensor blended_loss(const BlendConfig& cfg, std::span<const double> teacher_rows,
                    const Tensor& logits, std::span<const int> labels) {
  cfg.validate();
  Tensor soft = cross_entropy_soft(logits, teacher_rows, cfg.temperature);
  Tensor hard = cross_entropy_hard(logits, labels);
  return add(mul_scalar(soft, cfg.lambda), mul_scalar(hard, 1.0 - cfg.lambda));
}

std::size_t argmax_class(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;
  return best;
}

}  // namespace textblend
