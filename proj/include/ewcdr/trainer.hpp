#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"
#include "ewcdr/importance.hpp"
#include "ewcdr/metrics.hpp"
#include "ewcdr/network.hpp"
#include "ewcdr/regularizer.hpp"
#include "ewcdr/scenario.hpp"

namespace ewcdr {

struct Milestone {
    std::size_t epoch = 0;
    double factor = 1.0;

    bool operator==(const Milestone&) const = default;
};

struct TrainConfig {
    Method method = Method::ewc_dr;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<Milestone> lr_milestones = {{20, 0.1}};
    double lambda = 1.0;
    double gamma = 0.9;    // online variant decay
    double si_xi = 0.1;    // path-integral damping
    std::vector<std::size_t> hidden_widths = {64, 64};
    double head_init_scale = 1e-2;
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs == 0) throw validation_error("train config: epochs must be positive");
        if (batch_size == 0) throw validation_error("train config: batch_size must be positive");
        if (!(lr > 0.0)) throw validation_error("train config: lr must be positive");
        if (momentum < 0.0 || momentum >= 1.0)
            throw validation_error("train config: momentum must lie in [0, 1)");
        if (weight_decay < 0.0)
            throw validation_error("train config: weight_decay must be >= 0");
        if (lambda < 0.0) throw validation_error("train config: lambda must be >= 0");
        if (gamma < 0.0 || gamma > 1.0)
            throw validation_error("train config: gamma must lie in [0, 1]");
        if (!(si_xi > 0.0)) throw validation_error("train config: si_xi must be positive");
        if (head_init_scale < 0.0)
            throw validation_error("train config: head_init_scale must be >= 0");
        for (const auto& ms : lr_milestones)
            if (!(ms.factor > 0.0))
                throw validation_error("train config: milestone factor must be positive");
    }

    bool operator==(const TrainConfig&) const = default;
};

// Everything that persists across tasks in one continual run.
struct ContinualState {
    Network net;
    std::optional<Anchor> anchor;
    std::optional<SiAccumulator> si;
    std::size_t tasks_trained = 0;
    std::size_t classes_seen = 0;
    std::mt19937_64 rng;
};

inline ContinualState make_state(std::size_t input_dim, const TrainConfig& cfg) {
    cfg.validate();
    ContinualState state;
    state.rng = std::mt19937_64(cfg.seed);
    state.net = Network::seeded(input_dim, cfg.hidden_widths, state.rng);
    return state;
}

// One SGD update: velocity = momentum * velocity + (grad + wd * theta),
// theta -= lr * velocity. `lr` is the current value after any milestone
// decays, not necessarily cfg.lr.
inline void sgd_step(Network& net, const GradientSet& grad, BlockValues& velocity,
                     const TrainConfig& cfg, double lr) {
    auto params = net.param_blocks();
    if (params.size() != grad.blocks().size() || params.size() != velocity.blocks().size())
        throw shape_error("sgd_step: block count mismatch");
    for (auto& p : params) {
        const auto& g = grad.at(p.name);
        auto& v = velocity.at(p.name);
        if (g.shape != p.shape || v.shape != p.shape)
            throw shape_error("sgd_step: block '" + p.name + "' shape mismatch");
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            const double step = g.values[i] + cfg.weight_decay * p.data[i];
            v.values[i] = cfg.momentum * v.values[i] + step;
            p.data[i] -= lr * v.values[i];
        }
    }
}

namespace detail {

// Mean cross-entropy gradient over a batch of sample indices.
inline GradientSet batch_ce_grad(const Network& net, const LabeledDataset& data,
                                 const std::vector<std::size_t>& order, std::size_t begin,
                                 std::size_t end) {
    GradientSet acc = BlockValues::zeros_like(net);
    for (std::size_t k = begin; k < end; ++k) {
        const Sample& s = data.samples[order[k]];
        ForwardCache cache = forward(net, s.features);
        GradientSet g = grad_ce(net, cache, one_hot(net.num_classes(), s.label));
        acc.add_scaled(g, 1.0);
    }
    acc.scale(1.0 / static_cast<double>(end - begin));
    return acc;
}

}  // namespace detail

// Trains the next task in the stream. `classes` must be exactly the block of
// sequential ids that follows what the state has already seen; anything else
// is a protocol violation. The head is expanded for the new classes, the
// cross-entropy runs over all seen classes with no masking, and when an
// anchor exists and lambda is nonzero its gradient joins every step. With
// lambda == 0 (or no anchor) the regularizer is skipped outright, so such a
// run is bit-identical to plain fine-tuning.
inline void train_task(ContinualState& state, const LabeledDataset& train,
                       const std::vector<std::size_t>& classes, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw validation_error("train_task: empty training split");
    if (classes.empty()) throw protocol_error("train_task: task carries no classes");
    for (std::size_t k = 0; k < classes.size(); ++k)
        if (classes[k] != state.classes_seen + k)
            throw protocol_error("train_task: classes skip ahead of the stream (got " +
                                 std::to_string(classes[k]) + ", expected " +
                                 std::to_string(state.classes_seen + k) + ")");
    for (const Sample& s : train.samples)
        if (s.label < state.classes_seen || s.label >= state.classes_seen + classes.size())
            throw protocol_error("train_task: sample labeled " + std::to_string(s.label) +
                                 " does not belong to the current task");

    state.net = expand_head(state.net, classes.size(), cfg.head_init_scale, state.rng);
    state.classes_seen += classes.size();

    const bool track_si = cfg.method == Method::si;
    if (track_si) state.si = si_begin(state.net, cfg.si_xi);
    const bool regularize =
        state.anchor.has_value() && cfg.lambda != 0.0 && cfg.method != Method::finetune;

    BlockValues velocity = BlockValues::zeros_like(state.net);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double lr = cfg.lr;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& ms : cfg.lr_milestones)
            if (ms.epoch == epoch) lr *= ms.factor;
        std::shuffle(order.begin(), order.end(), state.rng);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            GradientSet grad = detail::batch_ce_grad(state.net, train, order, begin, end);
            std::optional<BlockValues> before;
            std::optional<GradientSet> task_grad;
            if (track_si) {
                before = BlockValues::snapshot(state.net);
                task_grad = grad;  // path integral uses the task loss gradient only
            }
            if (regularize) grad.add_scaled(reg_grad(*state.anchor, state.net), 1.0);
            sgd_step(state.net, grad, velocity, cfg, lr);
            if (track_si) {
                BlockValues delta = BlockValues::diff(BlockValues::snapshot(state.net), *before);
                si_step(*state.si, *task_grad, delta);
            }
        }
    }
    ++state.tasks_trained;
}

// Computes importance on the just-finished task's data and replaces the
// anchor. Never touches the network parameters. Fine-tuning keeps no anchor.
inline void consolidate(ContinualState& state, const LabeledDataset& train,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.method == Method::finetune) return;
    ImportanceMap omega;
    switch (cfg.method) {
        case Method::ewc:
            omega = fim_ewc(state.net, train);
            break;
        case Method::ewc_dr:
            omega = fim_ewc_dr(state.net, train);
            break;
        case Method::mas:
            omega = importance_mas(state.net, train);
            break;
        case Method::online_ewc: {
            ImportanceMap cur = fim_ewc(state.net, train);
            if (state.anchor) {
                omega = accumulate_online_ewc(state.anchor->omega, cur, cfg.gamma);
            } else {
                omega = std::move(cur);
                omega.method = Method::online_ewc;
            }
            break;
        }
        case Method::si: {
            if (!state.si)
                throw protocol_error("consolidate: no path integral to finalize; "
                                     "train a task first");
            omega = si_finalize(*state.si, BlockValues::snapshot(state.net));
            state.si.reset();
            break;
        }
        case Method::finetune:
            return;
    }
    state.anchor = make_anchor(state.net, std::move(omega), cfg.lambda);
}

struct RunResult {
    Network net;
    AccuracyMatrix matrix;
};

// Full continual pass over a stream: expand, train, evaluate on every seen
// task, consolidate, repeat. Each task's training split is fetched exactly
// once and earlier splits are never touched again. Pre-learning accuracy is
// recorded as 0 for every task: before a task arrives its classes have no
// head rows, so nothing can be predicted correctly.
inline RunResult run_stream(const TaskStream& stream, const TrainConfig& cfg) {
    cfg.validate();
    ContinualState state = make_state(stream.feature_dim(), cfg);
    AccuracyMatrix matrix(stream.task_count());
    for (std::size_t t = 0; t < stream.task_count(); ++t) {
        matrix.set_pre_learning(t, 0.0);
        const LabeledDataset& train = stream.train_split(t);
        train_task(state, train, stream.classes_of(t), cfg);
        for (std::size_t j = 0; j <= t; ++j) {
            const LabeledDataset& test = stream.test_split(j);
            if (j == t) matrix.set_test_size(j, test.size());
            matrix.set(t, j, accuracy(state.net, test, state.classes_seen));
        }
        if (t + 1 < stream.task_count()) consolidate(state, train, cfg);
    }
    return {std::move(state.net), std::move(matrix)};
}

}  // namespace ewcdr
