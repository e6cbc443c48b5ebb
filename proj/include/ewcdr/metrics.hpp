#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"
#include "ewcdr/io.hpp"
#include "ewcdr/network.hpp"

namespace ewcdr {

enum class Weighting { task_balanced, sample_weighted };

inline std::string weighting_name(Weighting w) {
    return w == Weighting::task_balanced ? "task_balanced" : "sample_weighted";
}

// Lower-triangular record of incremental evaluation: entry (t, j) is the
// accuracy (percent) on task j's test split after training through task t,
// for 0-based j <= t. Each task also has an optional pre-learning entry,
// accuracy on task j just before task j was trained. In class-incremental
// runs the head for those classes does not exist yet, so runs record 0.
class AccuracyMatrix {
public:
    explicit AccuracyMatrix(std::size_t num_tasks)
        : pre_(num_tasks, unset()), sizes_(num_tasks, 0) {
        if (num_tasks == 0) throw validation_error("accuracy matrix: need at least one task");
        rows_.reserve(num_tasks);
        for (std::size_t t = 0; t < num_tasks; ++t)
            rows_.emplace_back(t + 1, unset());
    }

    std::size_t task_count() const { return rows_.size(); }

    void set(std::size_t t, std::size_t j, double value) {
        check_cell(t, j);
        if (!(value >= 0.0 && value <= 100.0))
            throw validation_error("accuracy matrix: value " + std::to_string(value) +
                                   " outside [0, 100]");
        rows_[t][j] = value;
    }

    double at(std::size_t t, std::size_t j) const {
        check_cell(t, j);
        if (std::isnan(rows_[t][j]))
            throw validation_error("accuracy matrix: entry (" + std::to_string(t) + ", " +
                                   std::to_string(j) + ") not recorded");
        return rows_[t][j];
    }

    bool complete() const {
        for (const auto& row : rows_)
            for (double v : row)
                if (std::isnan(v)) return false;
        return true;
    }

    void set_pre_learning(std::size_t j, double value) {
        check_task(j);
        if (!(value >= 0.0 && value <= 100.0))
            throw validation_error("accuracy matrix: pre-learning value outside [0, 100]");
        pre_[j] = value;
    }

    std::optional<double> pre_learning(std::size_t j) const {
        check_task(j);
        if (std::isnan(pre_[j])) return std::nullopt;
        return pre_[j];
    }

    void set_test_size(std::size_t j, std::size_t n) {
        check_task(j);
        sizes_[j] = n;
    }

    std::size_t test_size(std::size_t j) const {
        check_task(j);
        return sizes_[j];
    }

private:
    static double unset() { return std::numeric_limits<double>::quiet_NaN(); }

    void check_task(std::size_t t) const {
        if (t >= rows_.size())
            throw validation_error("accuracy matrix: task " + std::to_string(t) + " of " +
                                   std::to_string(rows_.size()));
    }

    void check_cell(std::size_t t, std::size_t j) const {
        check_task(t);
        if (j > t)
            throw validation_error("accuracy matrix: entry (" + std::to_string(t) + ", " +
                                   std::to_string(j) + ") lies above the diagonal");
    }

    std::vector<std::vector<double>> rows_;
    std::vector<double> pre_;
    std::vector<std::size_t> sizes_;
};

// Top-1 accuracy in percent. Ties pick the lowest class index, so an
// all-zero network degrades to a constant class-0 predictor rather than
// depending on float noise.
inline double accuracy(const Network& net, const LabeledDataset& test,
                       std::size_t num_seen_classes) {
    if (test.empty()) throw validation_error("accuracy: empty test set");
    if (num_seen_classes == 0 || num_seen_classes > net.num_classes())
        throw validation_error("accuracy: asked about " + std::to_string(num_seen_classes) +
                               " classes, head has " + std::to_string(net.num_classes()));
    std::size_t correct = 0;
    for (const Sample& s : test.samples) {
        if (s.label >= num_seen_classes)
            throw validation_error("accuracy: test label " + std::to_string(s.label) +
                                   " has not been seen yet");
        const ForwardCache cache = forward(net, s.features);
        std::size_t best = 0;
        for (std::size_t k = 1; k < num_seen_classes; ++k)
            if (cache.logits[k] > cache.logits[best]) best = k;
        if (best == s.label) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

// Mean accuracy over tasks seen by stage t. Task-balanced averages the
// entries; sample-weighted weighs each by its test-set size.
inline double stage_accuracy(const AccuracyMatrix& m, std::size_t t,
                             Weighting w = Weighting::task_balanced) {
    if (t >= m.task_count())
        throw validation_error("stage_accuracy: stage " + std::to_string(t) + " of " +
                               std::to_string(m.task_count()));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j <= t; ++j) {
        const double weight =
            w == Weighting::task_balanced ? 1.0 : static_cast<double>(m.test_size(j));
        num += weight * m.at(t, j);
        den += weight;
    }
    if (den == 0.0) throw metric_error("stage_accuracy: zero total weight");
    return num / den;
}

// Mean accuracy over all tasks after the final one.
inline double a_last(const AccuracyMatrix& m, Weighting w = Weighting::task_balanced) {
    return stage_accuracy(m, m.task_count() - 1, w);
}

// Mean of the stage accuracies: (1/T) * sum_t stage_accuracy(t).
inline double a_avg(const AccuracyMatrix& m, Weighting w = Weighting::task_balanced) {
    double acc = 0.0;
    for (std::size_t t = 0; t < m.task_count(); ++t) acc += stage_accuracy(m, t, w);
    return acc / static_cast<double>(m.task_count());
}

// Percentage of task j's learned accuracy that has been lost by stage t:
//   100 * (a_jj - a_tj) / (a_jj - a_pre_j)
// where a_pre_j is the pre-learning accuracy on task j. 100 means all gain
// gone, 0 means none, negative values mean backward transfer. Undefined when
// the task never learned anything (zero denominator).
inline double forgetting_transfer(const AccuracyMatrix& m, std::size_t t, std::size_t j) {
    if (j >= t) throw validation_error("forgetting_transfer: needs j < t");
    const double learned = m.at(j, j);
    const double now = m.at(t, j);
    const auto pre = m.pre_learning(j);
    if (!pre)
        throw validation_error("forgetting_transfer: pre-learning accuracy for task " +
                               std::to_string(j) + " not recorded");
    const double denom = learned - *pre;
    if (denom == 0.0)
        throw metric_error("forgetting_transfer: task " + std::to_string(j) +
                           " gained nothing to forget");
    return 100.0 * (learned - now) / denom;
}

// Wide CSV: one row per stage t, columns are tasks j (1-based in the
// header), blank above the diagonal.
inline std::string matrix_csv(const AccuracyMatrix& m) {
    std::string out = "stage";
    for (std::size_t j = 0; j < m.task_count(); ++j)
        out += ",task" + std::to_string(j + 1);
    out += '\n';
    for (std::size_t t = 0; t < m.task_count(); ++t) {
        out += std::to_string(t + 1);
        for (std::size_t j = 0; j < m.task_count(); ++j) {
            out += ',';
            if (j <= t) out += format_double(m.at(t, j));
        }
        out += '\n';
    }
    return out;
}

// Full machine-readable report. Forgetting entries cover every (t, j) pair
// whose denominator is nonzero; pairs that never learned are skipped rather
// than reported as infinities.
inline nlohmann::json report_json(const AccuracyMatrix& m,
                                  Weighting w = Weighting::task_balanced) {
    nlohmann::json j;
    j["num_tasks"] = m.task_count();
    j["weighting"] = weighting_name(w);
    j["a_last"] = a_last(m, w);
    j["a_avg"] = a_avg(m, w);
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t t = 0; t < m.task_count(); ++t) stages.push_back(stage_accuracy(m, t, w));
    j["stage_accuracy"] = std::move(stages);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < m.task_count(); ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t jj = 0; jj <= t; ++jj) row.push_back(m.at(t, jj));
        rows.push_back(std::move(row));
    }
    j["matrix"] = std::move(rows);
    nlohmann::json pre = nlohmann::json::array();
    for (std::size_t t = 0; t < m.task_count(); ++t) {
        const auto p = m.pre_learning(t);
        if (p)
            pre.push_back(*p);
        else
            pre.push_back(nullptr);
    }
    j["pre_learning"] = std::move(pre);
    nlohmann::json forget = nlohmann::json::array();
    for (std::size_t t = 0; t < m.task_count(); ++t) {
        for (std::size_t jj = 0; jj < t; ++jj) {
            if (!m.pre_learning(jj)) continue;
            if (m.at(jj, jj) - *m.pre_learning(jj) == 0.0) continue;
            nlohmann::json e;
            e["stage"] = t + 1;
            e["task"] = jj + 1;
            e["accuracy"] = m.at(t, jj);
            e["transfer"] = forgetting_transfer(m, t, jj);
            forget.push_back(std::move(e));
        }
    }
    j["forgetting_transfer"] = std::move(forget);
    return j;
}

// Human-readable triangle, final accuracies annotated with the forgetting
// transfer in brackets where it is defined.
inline std::string matrix_table_text(const AccuracyMatrix& m) {
    std::string out;
    char buf[64];
    for (std::size_t t = 0; t < m.task_count(); ++t) {
        std::snprintf(buf, sizeof buf, "  stage %zu:", t + 1);
        out += buf;
        for (std::size_t j = 0; j <= t; ++j) {
            std::snprintf(buf, sizeof buf, " %6.2f", m.at(t, j));
            out += buf;
            if (j < t && m.pre_learning(j) && m.at(j, j) - *m.pre_learning(j) != 0.0) {
                std::snprintf(buf, sizeof buf, " [%.2f]", forgetting_transfer(m, t, j));
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace ewcdr
