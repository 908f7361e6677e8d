#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace textblend {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::optional<double> teacher_agreement;
};

struct MetricsReport {
  std::vector<EpochRecord> epochs;
  double final_accuracy = 0.0;
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

  // Wall-clock observations; serialized to a separate, machine-dependent
  // sidecar so the metrics file itself is reproducible bit for bit.
  std::vector<double> epoch_seconds;
  double total_seconds = 0.0;
};

/// One JSON object per epoch plus a final summary line. Deterministic bytes
/// for deterministic metrics.
void write_metrics(const std::string& path, const MetricsReport& report,
                   const nlohmann::json& context);

/// Timing sidecar (not covered by the reproducibility guarantee).
void write_timings(const std::string& path, const MetricsReport& report);

}  // namespace textblend
