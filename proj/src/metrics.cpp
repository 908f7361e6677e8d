#include "textblend/metrics.hpp"

#include <fstream>

#include "textblend/error.hpp"

namespace textblend {

using nlohmann::json;

void write_metrics(const std::string& path, const MetricsReport& report,
                   const json& context) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& e : report.epochs) {
    json record = {{"record", "epoch"},
                   {"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"test_accuracy", e.test_accuracy}};
    if (e.teacher_agreement) record["teacher_agreement"] = *e.teacher_agreement;
    out << record.dump() << "\n";
  }
  json summary = {{"record", "summary"},
                  {"final_accuracy", report.final_accuracy},
                  {"best_epoch", report.best_epoch},
                  {"best_accuracy", report.best_accuracy},
                  {"confusion", report.confusion}};
  for (auto it = context.begin(); it != context.end(); ++it)
    summary[it.key()] = it.value();
  out << summary.dump() << "\n";
  if (!out) throw IoError("write failed for " + path);
}

void write_timings(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  json record = {{"record", "timings"},
                 {"epoch_seconds", report.epoch_seconds},
                 {"total_seconds", report.total_seconds}};
  out << record.dump() << "\n";
}

}  // namespace textblend
