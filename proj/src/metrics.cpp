#include "recapdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "recapdet/errors.hpp"

namespace recapdet {

namespace {

void check_lengths(const std::vector<double>& scores, const std::vector<int>& labels,
                   const char* op) {
  if (scores.empty()) throw InputError(std::string(op) + ": empty input");
  if (scores.size() != labels.size())
    throw InputError(std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  for (int l : labels)
    if (l != 0 && l != 1)
      throw InputError(std::string(op) + ": label " + std::to_string(l) + " outside {0,1}");
}

// sorted ascending score lists per class
std::pair<std::vector<double>, std::vector<double>> split_classes(
    const std::vector<double>& scores, const std::vector<int>& labels, const char* op) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty())
    throw UndefinedMetricError(std::string(op) + ": needs both classes present");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  return {std::move(pos), std::move(neg)};
}

// FAR: genuine classified recaptured; FRR: recaptured classified genuine.
void far_frr(const std::vector<double>& pos_sorted, const std::vector<double>& neg_sorted,
             double threshold, double& far, double& frr) {
  const auto neg_below =
      std::lower_bound(neg_sorted.begin(), neg_sorted.end(), threshold) - neg_sorted.begin();
  const auto pos_below =
      std::lower_bound(pos_sorted.begin(), pos_sorted.end(), threshold) - pos_sorted.begin();
  far = static_cast<double>(neg_sorted.size() - static_cast<std::size_t>(neg_below)) /
        static_cast<double>(neg_sorted.size());
  frr = static_cast<double>(pos_below) / static_cast<double>(pos_sorted.size());
}

}  // namespace

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold) {
  check_lengths(scores, labels, "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if ((scores[i] >= threshold ? 1 : 0) == labels[i]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(scores.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores, labels, "auc");
  auto [pos, neg] = split_classes(scores, labels, "auc");
  std::int64_t wins = 0, ties = 0;
  for (double p : pos) {
    wins += std::lower_bound(neg.begin(), neg.end(), p) - neg.begin();
    ties += std::upper_bound(neg.begin(), neg.end(), p) -
            std::lower_bound(neg.begin(), neg.end(), p);
  }
  // integer numerator u/D with D = 2PN; the half with the smaller numerator
  // is the one divided, so complementing the labels complements the result
  // without a second rounding.
  const double u = 2.0 * static_cast<double>(wins) + static_cast<double>(ties);
  const double d = 2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size());
  if (2.0 * u <= d) return 100.0 * u / d;
  return 100.0 - 100.0 * (d - u) / d;
}

std::pair<double, double> eer(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores, labels, "eer");
  auto [pos, neg] = split_classes(scores, labels, "eer");

  std::vector<double> uniq(scores);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> candidates;
  candidates.push_back(uniq.front() - 1.0);
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  candidates.push_back(uniq.back() + 1.0);

  double best_gap = 2.0, best_value = 0.0, best_thr = candidates.front();
  for (double thr : candidates) {
    double far, frr;
    far_frr(pos, neg, thr, far, frr);
    const double gap = std::fabs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best_value = 0.5 * (far + frr);
      best_thr = thr;
    }
  }
  return {100.0 * best_value, best_thr};
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores, labels, "average_precision");
  std::size_t total_pos = 0;
  for (int l : labels) total_pos += static_cast<std::size_t>(l);
  if (total_pos == 0) throw UndefinedMetricError("average_precision: no positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1) {
      ++tp;
      // delta recall 1/total_pos times precision at this rank
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return 100.0 * ap / static_cast<double>(total_pos);
}

double hter(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  check_lengths(scores, labels, "hter");
  auto [pos, neg] = split_classes(scores, labels, "hter");
  double far, frr;
  far_frr(pos, neg, threshold, far, frr);
  return 100.0 * 0.5 * (far + frr);
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels) {
  check_lengths(scores, labels, "roc_points");
  auto [pos, neg] = split_classes(scores, labels, "roc_points");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels[order[i]] == 1)
      ++tp;
    else
      ++fp;
    // emit only at threshold boundaries so tied scores form one point
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]])
      pts.emplace_back(static_cast<double>(fp) / static_cast<double>(neg.size()),
                       static_cast<double>(tp) / static_cast<double>(pos.size()));
  }
  return pts;
}

EvalReport evaluate_scores(const std::string& scenario, const std::vector<double>& scores,
                           const std::vector<int>& labels, double hter_threshold) {
  EvalReport r;
  r.scenario = scenario;
  r.scores = scores;
  r.labels = labels;
  r.acc = accuracy(scores, labels, hter_threshold);
  r.auc = auc(scores, labels);
  auto [eer_value, eer_thr] = eer(scores, labels);
  r.eer = eer_value;
  r.threshold = eer_thr;
  r.ap = average_precision(scores, labels);
  r.hter = hter(scores, labels, hter_threshold);
  r.hter_threshold = hter_threshold;
  return r;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["scenario"] = report.scenario;
  j["scores"] = report.scores;
  j["labels"] = report.labels;
  j["acc"] = report.acc;
  j["auc"] = report.auc;
  j["eer"] = report.eer;
  j["ap"] = report.ap;
  j["hter"] = report.hter;
  j["threshold"] = report.threshold;
  j["hter_threshold"] = report.hter_threshold;
  j["config_hash"] = report.config_hash;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  EvalReport r;
  r.scenario = j.at("scenario").get<std::string>();
  r.scores = j.at("scores").get<std::vector<double>>();
  r.labels = j.at("labels").get<std::vector<int>>();
  r.acc = j.at("acc").get<double>();
  r.auc = j.at("auc").get<double>();
  r.eer = j.at("eer").get<double>();
  r.ap = j.at("ap").get<double>();
  r.hter = j.at("hter").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.hter_threshold = j.value("hter_threshold", 0.5);
  r.config_hash = j.value("config_hash", "");
  return r;
}

const char* kReportCsvHeader = "model,ACC(%),AUC(%),EER(%),AP(%),HTER(%)";

std::string report_csv_row(const std::string& model, const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f,%.2f,%.2f", model.c_str(), report.acc,
                report.auc, report.eer, report.ap, report.hter);
  return buf;
}

}  // namespace recapdet
