#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace x3ecg::eval {

namespace {

void check_counts(size_t a, size_t b, const char* what) {
    if (a != b)
        fail(Status::invalid_argument, std::string(what) + " length mismatch: " +
                                           std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

ConfusionCounts confusion_multi_class(const std::vector<int64_t>& pred,
                                      const std::vector<int64_t>& target, int num_classes) {
    check_counts(pred.size(), target.size(), "prediction/target");
    ConfusionCounts c;
    size_t C = static_cast<size_t>(num_classes);
    c.tp.assign(C, 0);
    c.fp.assign(C, 0);
    c.fn.assign(C, 0);
    c.tn.assign(C, 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        int64_t p = pred[i], t = target[i];
        if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
            fail(Status::invalid_argument, "class index out of range at sample " + std::to_string(i));
        for (size_t k = 0; k < C; ++k) {
            bool pp = static_cast<size_t>(p) == k, tt = static_cast<size_t>(t) == k;
            if (pp && tt)
                ++c.tp[k];
            else if (pp)
                ++c.fp[k];
            else if (tt)
                ++c.fn[k];
            else
                ++c.tn[k];
        }
    }
    return c;
}

ConfusionCounts confusion_multi_label(const std::vector<uint8_t>& pred,
                                      const std::vector<uint8_t>& target, int num_classes) {
    check_counts(pred.size(), target.size(), "prediction/target");
    size_t C = static_cast<size_t>(num_classes);
    if (C == 0 || pred.size() % C != 0)
        fail(Status::invalid_argument, "bit vector length not a multiple of the class count");
    ConfusionCounts c;
    c.tp.assign(C, 0);
    c.fp.assign(C, 0);
    c.fn.assign(C, 0);
    c.tn.assign(C, 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        size_t k = i % C;
        bool p = pred[i] != 0, t = target[i] != 0;
        if (p && t)
            ++c.tp[k];
        else if (p)
            ++c.fp[k];
        else if (t)
            ++c.fn[k];
        else
            ++c.tn[k];
    }
    return c;
}

F1Scores f1_scores(const ConfusionCounts& c) {
    F1Scores r;
    r.per_class.resize(c.tp.size());
    for (size_t k = 0; k < c.tp.size(); ++k) {
        double den = static_cast<double>(2 * c.tp[k] + c.fp[k] + c.fn[k]);
        r.per_class[k] = den > 0.0 ? 2.0 * static_cast<double>(c.tp[k]) / den : 0.0;
        r.macro += r.per_class[k];
    }
    if (!r.per_class.empty()) r.macro /= static_cast<double>(r.per_class.size());
    return r;
}

double accuracy_multi_class(const std::vector<int64_t>& pred, const std::vector<int64_t>& target) {
    check_counts(pred.size(), target.size(), "prediction/target");
    if (pred.empty()) fail(Status::invalid_argument, "accuracy over an empty set");
    size_t hit = 0;
    for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == target[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double accuracy_multi_label(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& target) {
    check_counts(pred.size(), target.size(), "prediction/target");
    if (pred.empty()) fail(Status::invalid_argument, "accuracy over an empty set");
    size_t hit = 0;
    for (size_t i = 0; i < pred.size(); ++i) hit += (pred[i] != 0) == (target[i] != 0);
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

const std::vector<double>& threshold_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g;
        // i/20.0 is correctly rounded, so grid points compare equal to the
        // parsed decimals (0.05, 0.3, ...); i*0.05 would drift off them.
        for (int i = 1; i <= 19; ++i) g.push_back(static_cast<double>(i) / 20.0);
        return g;
    }();
    return grid;
}

std::vector<int64_t> argmax_rows(const std::vector<double>& probs, int64_t n, int num_classes) {
    if (probs.size() != static_cast<size_t>(n) * static_cast<size_t>(num_classes))
        fail(Status::invalid_argument, "probability matrix size mismatch");
    std::vector<int64_t> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double* row = probs.data() + i * num_classes;
        int64_t best = 0;
        for (int k = 1; k < num_classes; ++k)
            if (row[k] > row[best]) best = k;
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

std::vector<uint8_t> apply_thresholds(const std::vector<double>& probs, int64_t n,
                                      int num_classes, const std::vector<double>& thresholds) {
    if (probs.size() != static_cast<size_t>(n) * static_cast<size_t>(num_classes))
        fail(Status::invalid_argument, "probability matrix size mismatch");
    if (thresholds.size() != static_cast<size_t>(num_classes))
        fail(Status::invalid_argument, "need one threshold per class");
    std::vector<uint8_t> out(probs.size());
    for (size_t i = 0; i < probs.size(); ++i)
        out[i] = probs[i] >= thresholds[i % static_cast<size_t>(num_classes)] ? 1 : 0;
    return out;
}

std::vector<double> threshold_search(const std::vector<double>& probs,
                                     const std::vector<uint8_t>& targets, int64_t n,
                                     int num_classes) {
    if (probs.size() != static_cast<size_t>(n) * static_cast<size_t>(num_classes) ||
        targets.size() != probs.size())
        fail(Status::invalid_argument, "probability/target matrix size mismatch");
    const std::vector<double>& grid = threshold_grid();
    std::vector<double> chosen(static_cast<size_t>(num_classes));
    for (int k = 0; k < num_classes; ++k) {
        double best_f1 = -1.0, best_thr = grid.front();
        for (double thr : grid) {
            int64_t tp = 0, fp = 0, fn = 0;
            for (int64_t i = 0; i < n; ++i) {
                bool p = probs[static_cast<size_t>(i * num_classes + k)] >= thr;
                bool t = targets[static_cast<size_t>(i * num_classes + k)] != 0;
                if (p && t)
                    ++tp;
                else if (p)
                    ++fp;
                else if (t)
                    ++fn;
            }
            double den = static_cast<double>(2 * tp + fp + fn);
            double f1 = den > 0.0 ? 2.0 * static_cast<double>(tp) / den : 0.0;
            if (f1 > best_f1) {
                best_f1 = f1;
                best_thr = thr;
            }
        }
        chosen[static_cast<size_t>(k)] = best_thr;
    }
    return chosen;
}

RoundMetrics evaluate_multi_class(const std::vector<double>& probs, int64_t n, int num_classes,
                                  const std::vector<int64_t>& targets) {
    if (n <= 0) fail(Status::invalid_argument, "empty test split");
    std::vector<int64_t> pred = argmax_rows(probs, n, num_classes);
    ConfusionCounts c = confusion_multi_class(pred, targets, num_classes);
    F1Scores f = f1_scores(c);
    RoundMetrics r;
    r.per_class_f1 = std::move(f.per_class);
    r.macro_f1 = f.macro;
    r.accuracy = accuracy_multi_class(pred, targets);
    return r;
}

RoundMetrics evaluate_multi_label(const std::vector<double>& probs, int64_t n, int num_classes,
                                  const std::vector<uint8_t>& targets,
                                  const std::vector<double>& thresholds) {
    if (n <= 0) fail(Status::invalid_argument, "empty test split");
    std::vector<uint8_t> pred = apply_thresholds(probs, n, num_classes, thresholds);
    ConfusionCounts c = confusion_multi_label(pred, targets, num_classes);
    F1Scores f = f1_scores(c);
    RoundMetrics r;
    r.per_class_f1 = std::move(f.per_class);
    r.macro_f1 = f.macro;
    r.accuracy = accuracy_multi_label(pred, targets);
    r.thresholds = thresholds;
    return r;
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    // anchored on the first value so a constant sequence yields that exact
    // value with exactly zero spread
    double c = xs.front();
    double acc = 0.0;
    for (double x : xs) acc += x - c;
    mean = c + acc / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / static_cast<double>(xs.size()));  // population
}

}  // namespace

AggregateReport aggregate(const std::vector<RoundMetrics>& rounds,
                          const std::vector<std::string>& class_names) {
    if (rounds.size() != 10)
        fail(Status::invalid_argument,
             "aggregate expects exactly 10 rounds, got " + std::to_string(rounds.size()));
    size_t C = class_names.size();
    for (const RoundMetrics& r : rounds)
        if (r.per_class_f1.size() != C)
            fail(Status::invalid_argument, "round class count does not match the class names");

    AggregateReport rep;
    rep.class_names = class_names;
    rep.rounds = rounds;
    rep.f1_mean.resize(C);
    rep.f1_std.resize(C);
    for (size_t k = 0; k < C; ++k) {
        std::vector<double> xs;
        for (const RoundMetrics& r : rounds) xs.push_back(r.per_class_f1[k]);
        mean_std(xs, rep.f1_mean[k], rep.f1_std[k]);
    }
    std::vector<double> macros, accs;
    for (const RoundMetrics& r : rounds) {
        macros.push_back(r.macro_f1);
        accs.push_back(r.accuracy);
    }
    mean_std(macros, rep.macro_f1_mean, rep.macro_f1_std);
    mean_std(accs, rep.accuracy_mean, rep.accuracy_std);

    if (!rounds.front().thresholds.empty()) {
        rep.threshold_mode.resize(C);
        for (size_t k = 0; k < C; ++k) {
            std::map<double, int> tally;  // grid values compare exactly
            for (const RoundMetrics& r : rounds) {
                if (r.thresholds.size() != C)
                    fail(Status::invalid_argument, "round threshold count mismatch");
                ++tally[r.thresholds[k]];
            }
            double mode = 0.0;
            int best = -1;
            for (const auto& [thr, count] : tally)
                if (count > best) {  // map order makes ties pick the lowest
                    best = count;
                    mode = thr;
                }
            rep.threshold_mode[k] = mode;
        }
    }
    return rep;
}

void write_report_csv(std::ostream& os, const AggregateReport& r) {
    os << "class,f1_mean,f1_std,threshold_mode\n";
    for (size_t k = 0; k < r.class_names.size(); ++k) {
        os << r.class_names[k] << "," << format_double(r.f1_mean[k]) << ","
           << format_double(r.f1_std[k]) << ",";
        if (!r.threshold_mode.empty()) os << format_double(r.threshold_mode[k]);
        os << "\n";
    }
    os << "macro_f1," << format_double(r.macro_f1_mean) << "," << format_double(r.macro_f1_std)
       << ",\n";
    os << "accuracy," << format_double(r.accuracy_mean) << "," << format_double(r.accuracy_std)
       << ",\n";
}

}  // namespace x3ecg::eval
