#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"
#include "ewcdr/io.hpp"
#include "ewcdr/network.hpp"

namespace ewcdr {

enum class Method { ewc, online_ewc, si, mas, ewc_dr, finetune };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::ewc: return "ewc";
        case Method::online_ewc: return "online_ewc";
        case Method::si: return "si";
        case Method::mas: return "mas";
        case Method::ewc_dr: return "ewc_dr";
        case Method::finetune: return "finetune";
    }
    throw validation_error("method_name: unknown method");
}

inline std::optional<Method> method_from_name(std::string_view s) {
    if (s == "ewc") return Method::ewc;
    if (s == "online_ewc") return Method::online_ewc;
    if (s == "si") return Method::si;
    if (s == "mas") return Method::mas;
    if (s == "ewc_dr") return Method::ewc_dr;
    if (s == "finetune") return Method::finetune;
    return std::nullopt;
}

// Per-parameter importance weights, one nonnegative value per entry of every
// network block, plus the estimator that produced them.
struct ImportanceMap {
    Method method = Method::ewc;
    std::size_t sample_count = 0;
    BlockValues values;
};

namespace detail {

inline void check_labels(const Network& net, const LabeledDataset& data, const char* who) {
    if (data.empty()) throw validation_error(std::string(who) + ": empty dataset");
    for (const Sample& s : data.samples)
        if (s.label >= net.num_classes())
            throw validation_error(std::string(who) + ": label " + std::to_string(s.label) +
                                   " outside the " + std::to_string(net.num_classes()) +
                                   "-way head");
}

}  // namespace detail

// Empirical diagonal Fisher: mean over samples of the squared cross-entropy
// gradient, evaluated at the ground-truth label.
inline ImportanceMap fim_ewc(const Network& net, const LabeledDataset& data) {
    detail::check_labels(net, data, "fim_ewc");
    BlockValues acc = BlockValues::zeros_like(net);
    for (const Sample& s : data.samples) {
        ForwardCache cache = forward(net, s.features);
        GradientSet g = grad_ce(net, cache, one_hot(net.num_classes(), s.label));
        acc.zip_apply(g, [](double a, double v) { return a + v * v; });
    }
    acc.scale(1.0 / static_cast<double>(data.size()));
    return {Method::ewc, data.size(), std::move(acc)};
}

// Same accumulation, but the per-sample gradient comes from cross-entropy on
// negated logits. Confidently classified samples keep a full-sized gradient
// instead of a vanishing one, so the resulting weights stay informative at
// the end of training.
inline ImportanceMap fim_ewc_dr(const Network& net, const LabeledDataset& data) {
    detail::check_labels(net, data, "fim_ewc_dr");
    BlockValues acc = BlockValues::zeros_like(net);
    for (const Sample& s : data.samples) {
        ForwardCache cache = forward(net, s.features);
        GradientSet g = grad_ce_reversed(net, cache, one_hot(net.num_classes(), s.label));
        acc.zip_apply(g, [](double a, double v) { return a + v * v; });
    }
    acc.scale(1.0 / static_cast<double>(data.size()));
    return {Method::ewc_dr, data.size(), std::move(acc)};
}

// Mean absolute gradient of the l2 output norm. Label-free.
inline ImportanceMap importance_mas(const Network& net, const LabeledDataset& data) {
    if (data.empty()) throw validation_error("importance_mas: empty dataset");
    BlockValues acc = BlockValues::zeros_like(net);
    for (const Sample& s : data.samples) {
        ForwardCache cache = forward(net, s.features);
        GradientSet g = grad_l2out(net, cache);
        acc.zip_apply(g, [](double a, double v) { return a + std::abs(v); });
    }
    acc.scale(1.0 / static_cast<double>(data.size()));
    return {Method::mas, data.size(), std::move(acc)};
}

// Running accumulation for online variants: gamma * previous + current.
// The previous map may have fewer head rows (the head grows between tasks);
// rows it never saw contribute zero. Any other shape difference is an error.
inline ImportanceMap accumulate_online_ewc(const ImportanceMap& prev, const ImportanceMap& cur,
                                           double gamma) {
    if (gamma < 0.0 || gamma > 1.0)
        throw validation_error("accumulate_online_ewc: gamma must lie in [0, 1]");
    ImportanceMap out;
    out.method = Method::online_ewc;
    out.sample_count = cur.sample_count;
    out.values = cur.values;
    for (auto& blk : out.values.blocks()) {
        const BlockValues::Block* p = prev.values.find(blk.name);
        if (!p) continue;
        // Only the head gains rows between tasks; body blocks must match.
        const bool head = blk.name.rfind("fc.", 0) == 0;
        const bool compatible =
            p->shape.is_matrix == blk.shape.is_matrix &&
            (!blk.shape.is_matrix || p->shape.cols == blk.shape.cols) &&
            (head ? p->shape.rows <= blk.shape.rows : p->shape.rows == blk.shape.rows);
        if (!compatible)
            throw validation_error("accumulate_online_ewc: block '" + blk.name +
                                   "' changed shape in a way head growth cannot explain");
        for (std::size_t i = 0; i < p->values.size(); ++i)
            blk.values[i] += gamma * p->values[i];
    }
    return out;
}

// Path-integral accumulator. omega collects -grad * delta per optimizer step;
// theta_start is frozen when a task begins.
struct SiAccumulator {
    BlockValues path;
    BlockValues theta_start;
    double xi = 0.1;
    std::size_t steps = 0;
};

inline SiAccumulator si_begin(const Network& net, double xi) {
    if (xi <= 0.0) throw validation_error("si_begin: xi must be positive");
    return {BlockValues::zeros_like(net), BlockValues::snapshot(net), xi, 0};
}

// grad is the task-loss gradient before regularization; delta is the actual
// parameter movement the step produced.
inline void si_step(SiAccumulator& acc, const GradientSet& grad, const BlockValues& delta) {
    if (acc.path.blocks().size() != grad.blocks().size() ||
        grad.blocks().size() != delta.blocks().size())
        throw shape_error("si_step: block count mismatch");
    for (std::size_t b = 0; b < acc.path.blocks().size(); ++b) {
        auto& pb = acc.path.blocks()[b];
        const auto& g = grad.at(pb.name);
        const auto& d = delta.at(pb.name);
        if (g.shape != pb.shape || d.shape != pb.shape)
            throw shape_error("si_step: block '" + pb.name + "' shape mismatch");
        for (std::size_t i = 0; i < pb.values.size(); ++i)
            pb.values[i] += -g.values[i] * d.values[i];
    }
    ++acc.steps;
}

// Omega_i = max(0, omega_i) / ((theta_end_i - theta_start_i)^2 + xi).
inline ImportanceMap si_finalize(const SiAccumulator& acc, const BlockValues& theta_end) {
    ImportanceMap out;
    out.method = Method::si;
    out.sample_count = acc.steps;
    out.values = acc.path;
    for (auto& blk : out.values.blocks()) {
        const auto& start = acc.theta_start.at(blk.name);
        const auto& end = theta_end.at(blk.name);
        if (start.shape != blk.shape || end.shape != blk.shape)
            throw shape_error("si_finalize: block '" + blk.name + "' shape mismatch");
        for (std::size_t i = 0; i < blk.values.size(); ++i) {
            const double move = end.values[i] - start.values[i];
            const double raw = blk.values[i] > 0.0 ? blk.values[i] : 0.0;
            blk.values[i] = raw / (move * move + acc.xi);
        }
    }
    return out;
}

// Sums head-row importance per class. Useful for ranking which classes an
// estimator would protect.
inline std::vector<double> per_class_head_importance(const ImportanceMap& omega) {
    const BlockValues::Block* head = omega.values.find("fc.weight");
    if (!head) throw validation_error("per_class_head_importance: no fc.weight block");
    std::vector<double> out(head->shape.rows, 0.0);
    for (std::size_t r = 0; r < head->shape.rows; ++r)
        for (std::size_t c = 0; c < head->shape.cols; ++c)
            out[r] += head->values[r * head->shape.cols + c];
    return out;
}

// One line per parameter entry: block,row,col,value. Vector blocks report
// col 0. Values print with enough digits to parse back exactly.
inline std::string importance_csv(const ImportanceMap& omega) {
    std::string out = "block,row,col,value\n";
    for (const auto& blk : omega.values.blocks()) {
        for (std::size_t r = 0; r < blk.shape.rows; ++r) {
            const std::size_t cols = blk.shape.is_matrix ? blk.shape.cols : 1;
            for (std::size_t c = 0; c < cols; ++c) {
                out += blk.name;
                out += ',';
                out += std::to_string(r);
                out += ',';
                out += std::to_string(c);
                out += ',';
                out += format_double(blk.values[r * cols + c]);
                out += '\n';
            }
        }
    }
    return out;
}

}  // namespace ewcdr
