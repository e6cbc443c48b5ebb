#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"

namespace ewcdr {

// Gaussian blobs: class c gets a mean drawn uniform on the sphere of radius
// `separation`, samples are mean + standard normal noise. Everything flows
// from the seed, so the same arguments always produce the same bytes.
inline LabeledDataset make_synthetic(std::size_t num_classes, std::size_t feature_dim,
                                     std::size_t per_class, double separation,
                                     std::uint64_t seed) {
    if (num_classes == 0) throw validation_error("make_synthetic: need at least one class");
    if (feature_dim == 0) throw validation_error("make_synthetic: feature_dim must be positive");
    if (per_class == 0) throw validation_error("make_synthetic: per_class must be positive");
    if (separation < 0.0) throw validation_error("make_synthetic: separation must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LabeledDataset out;
    out.feature_dim = feature_dim;
    out.num_classes = num_classes;
    out.samples.reserve(num_classes * per_class);
    for (std::size_t c = 0; c < num_classes; ++c) {
        Tensor1 mean(feature_dim);
        double norm = 0.0;
        for (std::size_t d = 0; d < feature_dim; ++d) {
            mean[d] = gauss(rng);
            norm += mean[d] * mean[d];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (std::size_t d = 0; d < feature_dim; ++d) mean[d] *= separation / norm;
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.features = Tensor1(feature_dim);
            for (std::size_t d = 0; d < feature_dim; ++d) s.features[d] = mean[d] + gauss(rng);
            s.label = c;
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

// One incremental task: a contiguous run of sequential class ids, the source
// dataset's original ids for reference, and its train/test splits (already
// relabeled to the sequential ids).
struct Task {
    std::size_t id = 0;
    std::vector<std::size_t> classes;
    std::vector<std::size_t> original_classes;
    LabeledDataset train;
    LabeledDataset test;
};

// A fixed task sequence with instrumented access. Splits are only reachable
// through train_split/test_split, and every call is logged, which lets tests
// prove a training run never revisited earlier task data.
class TaskStream {
public:
    struct Access {
        std::size_t task;
        bool train;
    };

    TaskStream(std::vector<Task> tasks, std::size_t feature_dim)
        : tasks_(std::move(tasks)),
          feature_dim_(feature_dim),
          log_(std::make_unique<LogState>()) {
        if (tasks_.empty()) throw validation_error("task stream: no tasks");
    }

    std::size_t task_count() const { return tasks_.size(); }
    std::size_t feature_dim() const { return feature_dim_; }

    std::size_t total_classes() const {
        std::size_t n = 0;
        for (const auto& t : tasks_) n += t.classes.size();
        return n;
    }

    const std::vector<std::size_t>& classes_of(std::size_t t) const {
        return task_at(t).classes;
    }

    const std::vector<std::size_t>& original_classes_of(std::size_t t) const {
        return task_at(t).original_classes;
    }

    const LabeledDataset& train_split(std::size_t t) const {
        record(t, true);
        return task_at(t).train;
    }

    const LabeledDataset& test_split(std::size_t t) const {
        record(t, false);
        return task_at(t).test;
    }

    std::vector<Access> access_log() const {
        std::lock_guard<std::mutex> lock(log_->mutex);
        return log_->entries;
    }

    void clear_access_log() const {
        std::lock_guard<std::mutex> lock(log_->mutex);
        log_->entries.clear();
    }

private:
    struct LogState {
        mutable std::mutex mutex;
        std::vector<Access> entries;
    };

    const Task& task_at(std::size_t t) const {
        if (t >= tasks_.size())
            throw validation_error("task stream: task " + std::to_string(t) + " of " +
                                   std::to_string(tasks_.size()));
        return tasks_[t];
    }

    void record(std::size_t t, bool train) const {
        std::lock_guard<std::mutex> lock(log_->mutex);
        log_->entries.push_back({t, train});
    }

    std::vector<Task> tasks_;
    std::size_t feature_dim_;
    std::unique_ptr<LogState> log_;
};

namespace detail {

// Shuffles class identity once, carves the shuffled order into groups, and
// relabels so task t covers sequential ids [offset, offset + size). With a
// single source dataset the per-class 80/20 train/test split happens here
// too, before any task assignment, using the same seeded generator.
inline TaskStream build_stream(const LabeledDataset& train_all, const LabeledDataset& test_all,
                               const std::vector<std::size_t>& group_sizes, std::uint64_t seed) {
    train_all.validate();
    test_all.validate();
    if (train_all.feature_dim != test_all.feature_dim ||
        train_all.num_classes != test_all.num_classes)
        throw validation_error("task split: train and test datasets disagree");
    const std::size_t C = train_all.num_classes;

    std::vector<std::size_t> order(C);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> new_label(C, 0);
    for (std::size_t i = 0; i < C; ++i) new_label[order[i]] = i;

    std::vector<Task> tasks;
    std::size_t offset = 0;
    for (std::size_t t = 0; t < group_sizes.size(); ++t) {
        Task task;
        task.id = t;
        for (std::size_t k = 0; k < group_sizes[t]; ++k) {
            task.classes.push_back(offset + k);
            task.original_classes.push_back(order[offset + k]);
        }
        task.train.feature_dim = train_all.feature_dim;
        task.train.num_classes = offset + group_sizes[t];
        task.test.feature_dim = train_all.feature_dim;
        task.test.num_classes = offset + group_sizes[t];
        tasks.push_back(std::move(task));
        offset += group_sizes[t];
    }

    auto task_of_class = [&](std::size_t orig) {
        std::size_t seq = new_label[orig];
        std::size_t acc = 0;
        for (std::size_t t = 0; t < group_sizes.size(); ++t) {
            acc += group_sizes[t];
            if (seq < acc) return t;
        }
        throw validation_error("task split: class fell outside every group");
    };

    for (const Sample& s : train_all.samples) {
        Sample copy = s;
        copy.label = new_label[s.label];
        tasks[task_of_class(s.label)].train.samples.push_back(std::move(copy));
    }
    for (const Sample& s : test_all.samples) {
        Sample copy = s;
        copy.label = new_label[s.label];
        tasks[task_of_class(s.label)].test.samples.push_back(std::move(copy));
    }
    return TaskStream(std::move(tasks), train_all.feature_dim);
}

// 80/20 per-class holdout. Sample order within a class is shuffled with the
// stream seed; at least one sample stays in training when a class has any.
inline std::pair<LabeledDataset, LabeledDataset> holdout_split(const LabeledDataset& data,
                                                               std::uint64_t seed) {
    data.validate();
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::vector<std::size_t>> by_class(data.num_classes);
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        by_class[data.samples[i].label].push_back(i);
    LabeledDataset train, test;
    train.feature_dim = test.feature_dim = data.feature_dim;
    train.num_classes = test.num_classes = data.num_classes;
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t keep = (idx.size() * 4) / 5;
        if (keep == 0 && !idx.empty()) keep = 1;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            (k < keep ? train : test).samples.push_back(data.samples[idx[k]]);
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace detail

// Classes shuffled by seed, then dealt into num_tasks equal groups.
inline TaskStream split_equally(const LabeledDataset& train, const LabeledDataset& test,
                                std::size_t num_tasks, std::uint64_t seed) {
    if (num_tasks == 0) throw validation_error("split_equally: need at least one task");
    if (train.num_classes % num_tasks != 0)
        throw validation_error("split_equally: " + std::to_string(train.num_classes) +
                               " classes do not divide into " + std::to_string(num_tasks) +
                               " tasks");
    std::vector<std::size_t> sizes(num_tasks, train.num_classes / num_tasks);
    return detail::build_stream(train, test, sizes, seed);
}

inline TaskStream split_equally(const LabeledDataset& data, std::size_t num_tasks,
                                std::uint64_t seed) {
    auto [train, test] = detail::holdout_split(data, seed);
    if (num_tasks == 0) throw validation_error("split_equally: need at least one task");
    if (data.num_classes % num_tasks != 0)
        throw validation_error("split_equally: " + std::to_string(data.num_classes) +
                               " classes do not divide into " + std::to_string(num_tasks) +
                               " tasks");
    std::vector<std::size_t> sizes(num_tasks, data.num_classes / num_tasks);
    return detail::build_stream(train, test, sizes, seed);
}

// A large first task followed by equal increments: initial_classes up front,
// then (C - initial_classes) / increment_size further tasks.
inline std::vector<std::size_t> big_start_sizes(std::size_t num_classes,
                                                std::size_t initial_classes,
                                                std::size_t increment_size) {
    if (initial_classes == 0)
        throw validation_error("split_big_start: initial task needs at least one class");
    if (increment_size == 0)
        throw validation_error("split_big_start: increment size must be positive");
    if (initial_classes >= num_classes)
        throw validation_error("split_big_start: initial task must leave classes to add");
    if ((num_classes - initial_classes) % increment_size != 0)
        throw validation_error("split_big_start: remaining " +
                               std::to_string(num_classes - initial_classes) +
                               " classes do not divide into increments of " +
                               std::to_string(increment_size));
    std::vector<std::size_t> sizes{initial_classes};
    for (std::size_t left = num_classes - initial_classes; left > 0; left -= increment_size)
        sizes.push_back(increment_size);
    return sizes;
}

inline TaskStream split_big_start(const LabeledDataset& train, const LabeledDataset& test,
                                  std::size_t initial_classes, std::size_t increment_size,
                                  std::uint64_t seed) {
    return detail::build_stream(
        train, test, big_start_sizes(train.num_classes, initial_classes, increment_size), seed);
}

inline TaskStream split_big_start(const LabeledDataset& data, std::size_t initial_classes,
                                  std::size_t increment_size, std::uint64_t seed) {
    auto sizes = big_start_sizes(data.num_classes, initial_classes, increment_size);
    auto [train, test] = detail::holdout_split(data, seed);
    return detail::build_stream(train, test, sizes, seed);
}

}  // namespace ewcdr
