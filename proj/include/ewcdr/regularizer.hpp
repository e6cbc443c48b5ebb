#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "ewcdr/errors.hpp"
#include "ewcdr/importance.hpp"
#include "ewcdr/network.hpp"

namespace ewcdr {

// Consolidated knowledge after a task: reference parameters, their importance
// weights, and the penalty strength. A single anchor is kept at a time; each
// consolidation replaces it (the importance map itself may accumulate
// history, as the online variant does).
struct Anchor {
    BlockValues theta_ref;
    ImportanceMap omega;
    double lambda = 0.0;
};

namespace detail {

// The anchor may cover fewer head rows than the live network: rows added for
// later tasks have no reference value and stay unpenalized. Within a head
// block the anchored entries are always a prefix, because expand_head only
// appends rows. Body blocks never change shape, so anything else is a real
// conflict.
inline void check_anchor_block(const BlockShape& anchored, const BlockShape& live,
                               const std::string& name) {
    const bool head = name.rfind("fc.", 0) == 0;
    const bool ok = anchored.is_matrix == live.is_matrix &&
                    (anchored.is_matrix ? anchored.cols == live.cols : true) &&
                    (head ? anchored.rows <= live.rows : anchored.rows == live.rows);
    if (!ok)
        throw validation_error("anchor block '" + name +
                               "' cannot be aligned with the live parameters");
}

}  // namespace detail

inline Anchor make_anchor(const Network& net, ImportanceMap omega, double lambda) {
    if (lambda < 0.0) throw validation_error("make_anchor: lambda must be >= 0");
    BlockValues theta = BlockValues::snapshot(net);
    for (const auto& blk : omega.values.blocks()) {
        const BlockValues::Block* t = theta.find(blk.name);
        if (!t || t->shape != blk.shape)
            throw validation_error("make_anchor: importance block '" + blk.name +
                                   "' does not match the network");
    }
    return {std::move(theta), std::move(omega), lambda};
}

// (lambda / 2) * sum_i Omega_i * (theta_ref_i - theta_i)^2 over anchored entries.
inline double reg_loss(const Anchor& anchor, const BlockValues& theta) {
    double acc = 0.0;
    for (const auto& ablk : anchor.theta_ref.blocks()) {
        const BlockValues::Block& live = theta.at(ablk.name);
        detail::check_anchor_block(ablk.shape, live.shape, ablk.name);
        const auto& om = anchor.omega.values.at(ablk.name);
        if (om.shape != ablk.shape)
            throw validation_error("reg_loss: importance block '" + ablk.name +
                                   "' does not match the anchor");
        for (std::size_t i = 0; i < ablk.values.size(); ++i) {
            const double dev = ablk.values[i] - live.values[i];
            acc += om.values[i] * dev * dev;
        }
    }
    return 0.5 * anchor.lambda * acc;
}

inline double reg_loss(const Anchor& anchor, const Network& net) {
    return reg_loss(anchor, BlockValues::snapshot(net));
}

// Gradient of reg_loss w.r.t. the live parameters:
// lambda * Omega_i * (theta_i - theta_ref_i), zero on unanchored entries.
inline GradientSet reg_grad(const Anchor& anchor, const BlockValues& theta) {
    GradientSet g = theta;
    for (auto& blk : g.blocks()) std::fill(blk.values.begin(), blk.values.end(), 0.0);
    for (const auto& ablk : anchor.theta_ref.blocks()) {
        const BlockValues::Block& live = theta.at(ablk.name);
        detail::check_anchor_block(ablk.shape, live.shape, ablk.name);
        const auto& om = anchor.omega.values.at(ablk.name);
        if (om.shape != ablk.shape)
            throw validation_error("reg_grad: importance block '" + ablk.name +
                                   "' does not match the anchor");
        BlockValues::Block& out = g.at(ablk.name);
        for (std::size_t i = 0; i < ablk.values.size(); ++i)
            out.values[i] = anchor.lambda * om.values[i] * (live.values[i] - ablk.values[i]);
    }
    return g;
}

inline GradientSet reg_grad(const Anchor& anchor, const Network& net) {
    return reg_grad(anchor, BlockValues::snapshot(net));
}

}  // namespace ewcdr
