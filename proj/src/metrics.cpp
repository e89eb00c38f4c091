#include "ariign/metrics.hpp"

#include <sstream>

#include <json.hpp>

#include "ariign/errors.hpp"

namespace ariign {

namespace {

void check_inputs(const std::vector<int>& preds, const std::vector<int>& labels,
                  int class_count) {
  if (preds.size() != labels.size())
    throw ConfigError("metrics: preds and labels differ in length");
  if (class_count <= 0) throw ConfigError("metrics: class_count must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      throw DataError("metrics: label out of range at index " + std::to_string(i));
    if (preds[i] < 0 || preds[i] >= class_count)
      throw DataError("metrics: prediction out of range at index " + std::to_string(i));
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& preds,
                                                       const std::vector<int>& labels,
                                                       int class_count) {
  check_inputs(preds, labels, class_count);
  std::vector<std::vector<std::size_t>> cm(
      class_count, std::vector<std::size_t>(class_count, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) ++cm[labels[i]][preds[i]];
  return cm;
}

std::vector<double> per_class_accuracy(const std::vector<int>& preds,
                                       const std::vector<int>& labels, int class_count) {
  auto cm = confusion_matrix(preds, labels, class_count);
  std::vector<double> acc(class_count, 0.0);
  for (int j = 0; j < class_count; ++j) {
    std::size_t support = 0;
    for (int k = 0; k < class_count; ++k) support += cm[j][k];
    acc[j] = support == 0 ? 0.0
                          : static_cast<double>(cm[j][j]) / static_cast<double>(support);
  }
  return acc;
}

std::vector<double> per_class_f1(const std::vector<int>& preds,
                                 const std::vector<int>& labels, int class_count) {
  auto cm = confusion_matrix(preds, labels, class_count);
  std::vector<double> f1(class_count, 0.0);
  for (int j = 0; j < class_count; ++j) {
    std::size_t tp = cm[j][j], fn = 0, fp = 0;
    for (int k = 0; k < class_count; ++k) {
      if (k != j) {
        fn += cm[j][k];
        fp += cm[k][j];
      }
    }
    double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    f1[j] = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  return f1;
}

std::pair<double, double> weighted_averages(const std::vector<double>& accuracy,
                                            const std::vector<double>& f1,
                                            const std::vector<std::size_t>& supports) {
  if (accuracy.size() != supports.size() || f1.size() != supports.size())
    throw ConfigError("weighted_averages: size mismatch");
  double total = 0.0, wa = 0.0, wf = 0.0;
  for (std::size_t j = 0; j < supports.size(); ++j) {
    double t = static_cast<double>(supports[j]);
    total += t;
    wa += t * accuracy[j];
    wf += t * f1[j];
  }
  if (total == 0.0) throw ConfigError("weighted_averages: zero total support");
  return {wa / total, wf / total};
}

MetricsReport compute_metrics(const std::vector<int>& preds,
                              const std::vector<int>& labels, int class_count) {
  MetricsReport report;
  report.confusion = confusion_matrix(preds, labels, class_count);
  report.total = preds.size();
  auto acc = per_class_accuracy(preds, labels, class_count);
  auto f1 = per_class_f1(preds, labels, class_count);
  std::vector<std::size_t> supports(class_count, 0);
  for (int j = 0; j < class_count; ++j) {
    ClassMetrics cm;
    std::size_t tp = report.confusion[j][j], fn = 0, fp = 0;
    for (int k = 0; k < class_count; ++k) {
      supports[j] += report.confusion[j][k];
      if (k != j) {
        fn += report.confusion[j][k];
        fp += report.confusion[k][j];
      }
    }
    cm.support = supports[j];
    cm.accuracy = acc[j];
    cm.f1 = f1[j];
    cm.precision =
        tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    cm.recall =
        tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    cm.degenerate = supports[j] == 0 || tp + fp == 0 || tp + fn == 0;
    report.per_class.push_back(cm);
  }
  auto [waa, wf1] = weighted_averages(acc, f1, supports);
  report.waa = waa;
  report.wf1 = wf1;
  return report;
}

std::string metrics_to_json(const MetricsReport& report,
                            const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["waa"] = report.waa;
  j["wf1"] = report.wf1;
  j["total"] = report.total;
  j["per_class"] = nlohmann::json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    j["per_class"].push_back({
        {"name", c < class_names.size() ? class_names[c] : std::to_string(c)},
        {"accuracy", m.accuracy},
        {"precision", m.precision},
        {"recall", m.recall},
        {"f1", m.f1},
        {"support", m.support},
        {"degenerate", m.degenerate},
    });
  }
  j["confusion"] = report.confusion;
  return j.dump(2);
}

std::string confusion_to_csv(const MetricsReport& report,
                             const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "gold\\pred";
  for (std::size_t c = 0; c < report.confusion.size(); ++c)
    os << ',' << (c < class_names.size() ? class_names[c] : std::to_string(c));
  os << '\n';
  for (std::size_t r = 0; r < report.confusion.size(); ++r) {
    os << (r < class_names.size() ? class_names[r] : std::to_string(r));
    for (std::size_t c = 0; c < report.confusion[r].size(); ++c)
      os << ',' << report.confusion[r][c];
    os << '\n';
  }
  return os.str();
}

}  // namespace ariign
