#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "common.hpp"

namespace x3ecg::eval {

struct ConfusionCounts {
    std::vector<int64_t> tp, fp, fn, tn;  // one entry per class
    int num_classes() const { return static_cast<int>(tp.size()); }
};

ConfusionCounts confusion_multi_class(const std::vector<int64_t>& pred,
                                      const std::vector<int64_t>& target, int num_classes);
// pred/target are row-major [n][C] bit vectors
ConfusionCounts confusion_multi_label(const std::vector<uint8_t>& pred,
                                      const std::vector<uint8_t>& target, int num_classes);

struct F1Scores {
    std::vector<double> per_class;
    double macro = 0.0;
};

// F1_c = 2tp / (2tp + fp + fn), defined as 0 on a zero denominator;
// macro is the unweighted mean over classes.
F1Scores f1_scores(const ConfusionCounts& c);

// multi-class: fraction of exactly-correct samples
double accuracy_multi_class(const std::vector<int64_t>& pred, const std::vector<int64_t>& target);
// multi-label: mean correctness over all n*C binary label decisions
double accuracy_multi_label(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& target);

// {0.05, 0.10, ..., 0.95}
const std::vector<double>& threshold_grid();

std::vector<int64_t> argmax_rows(const std::vector<double>& probs, int64_t n, int num_classes);
// bit = prob >= threshold
std::vector<uint8_t> apply_thresholds(const std::vector<double>& probs, int64_t n,
                                      int num_classes, const std::vector<double>& thresholds);

// Per-class independent grid search maximizing F1 on (probs, targets);
// ties break toward the lowest threshold.
std::vector<double> threshold_search(const std::vector<double>& probs,
                                     const std::vector<uint8_t>& targets, int64_t n,
                                     int num_classes);

struct RoundMetrics {
    std::vector<double> per_class_f1;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<double> thresholds;  // empty in multi-class mode
};

RoundMetrics evaluate_multi_class(const std::vector<double>& probs, int64_t n, int num_classes,
                                  const std::vector<int64_t>& targets);
// thresholds must come from validation data, never from the test targets
RoundMetrics evaluate_multi_label(const std::vector<double>& probs, int64_t n, int num_classes,
                                  const std::vector<uint8_t>& targets,
                                  const std::vector<double>& thresholds);

struct AggregateReport {
    std::vector<std::string> class_names;
    std::vector<RoundMetrics> rounds;
    std::vector<double> f1_mean, f1_std;
    double macro_f1_mean = 0.0, macro_f1_std = 0.0;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    std::vector<double> threshold_mode;  // per-class modal threshold; empty in multi-class mode
};

// Requires exactly 10 rounds (the CV protocol); std uses the population
// denominator since the rounds are the whole experiment.
AggregateReport aggregate(const std::vector<RoundMetrics>& rounds,
                          const std::vector<std::string>& class_names);

// `class,f1_mean,f1_std,threshold_mode` rows, then macro_f1 / accuracy
// summary rows.
void write_report_csv(std::ostream& os, const AggregateReport& r);

}  // namespace x3ecg::eval
