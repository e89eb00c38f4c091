#pragma once

// Per-class accuracy/F1, support-weighted averages, confusion matrix.

#include <string>
#include <vector>

namespace ariign {

struct ClassMetrics {
  double accuracy = 0.0;  // recall on the gold class
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool degenerate = false;  // zero support or zero-division guard fired
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double waa = 0.0;
  double wf1 = 0.0;
  // rows = gold, cols = predicted
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
};

std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& preds,
                                                       const std::vector<int>& labels,
                                                       int class_count);

std::vector<double> per_class_accuracy(const std::vector<int>& preds,
                                       const std::vector<int>& labels, int class_count);

std::vector<double> per_class_f1(const std::vector<int>& preds,
                                 const std::vector<int>& labels, int class_count);

// (waa, wf1) with supports as weights.
std::pair<double, double> weighted_averages(const std::vector<double>& accuracy,
                                            const std::vector<double>& f1,
                                            const std::vector<std::size_t>& supports);

MetricsReport compute_metrics(const std::vector<int>& preds,
                              const std::vector<int>& labels, int class_count);

std::string metrics_to_json(const MetricsReport& report,
                            const std::vector<std::string>& class_names);
std::string confusion_to_csv(const MetricsReport& report,
                             const std::vector<std::string>& class_names);

}  // namespace ariign
