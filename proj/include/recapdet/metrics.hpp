#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace recapdet {

// Scores are P(recaptured) in [0,1]; labels use 0 = genuine, 1 = recaptured.
// All metrics are percentages in [0,100]. Decision rule everywhere:
// score >= threshold predicts recaptured.

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie), x100.
// Computed so that auc(s, l) + auc(s, 1-l) == 100 holds exactly in doubles.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Threshold sweep over score midpoints (plus below-min / above-max); returns
// {(FAR+FRR)/2 x100 at the |FAR-FRR|-minimizing point, that threshold}.
std::pair<double, double> eer(const std::vector<double>& scores, const std::vector<int>& labels);

// Rank-summation AP over the descending-score ordering; ties keep input
// order (stable sort).
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

// (FAR + FRR)/2 x100 at a fixed decision threshold.
double hter(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);

// ROC polyline as (FPR, TPR) pairs, threshold descending.
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels);

struct EvalReport {
  std::string scenario;
  std::vector<double> scores;
  std::vector<int> labels;
  double acc = 0, auc = 0, eer = 0, ap = 0, hter = 0;
  double threshold = 0;       // EER operating threshold
  double hter_threshold = 0.5;  // fixed decision threshold used for ACC/HTER
  std::string config_hash;
};

EvalReport evaluate_scores(const std::string& scenario, const std::vector<double>& scores,
                           const std::vector<int>& labels, double hter_threshold = 0.5);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

// CSV rows in the evaluation-table column order:
// model, ACC(%), AUC(%), EER(%), AP(%), HTER(%).
extern const char* kReportCsvHeader;
std::string report_csv_row(const std::string& model, const EvalReport& report);

}  // namespace recapdet
