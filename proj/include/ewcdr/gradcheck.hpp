#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ewcdr/errors.hpp"
#include "ewcdr/network.hpp"

namespace ewcdr {

// Central finite differences of an arbitrary scalar loss of the parameters.
// Completely independent of the handwritten backward pass: it only calls the
// supplied loss, twice per parameter.
template <class LossFn>
inline GradientSet fd_gradient(const Network& net, LossFn&& loss, double step) {
    if (!(step > 0.0)) throw validation_error("fd_gradient: step must be positive");
    Network work = net;
    GradientSet out = BlockValues::zeros_like(net);
    auto params = work.param_blocks();
    for (auto& p : params) {
        auto& blk = out.at(p.name);
        for (std::size_t i = 0; i < blk.values.size(); ++i) {
            const double orig = p.data[i];
            p.data[i] = orig + step;
            const double up = loss(std::as_const(work));
            p.data[i] = orig - step;
            const double down = loss(std::as_const(work));
            p.data[i] = orig;
            blk.values[i] = (up - down) / (2.0 * step);
        }
    }
    return out;
}

struct GradCheckResult {
    bool pass = true;
    std::size_t instances = 0;
    std::size_t entries = 0;
    double worst_rel = 0.0;   // |manual - fd| / max(|manual|, |fd|, floor scale)
    std::string worst_at;
};

namespace detail {

inline void compare_grads(const GradientSet& manual, const GradientSet& fd, double rel_tol,
                          double abs_floor, const std::string& tag, GradCheckResult& res) {
    for (const auto& mb : manual.blocks()) {
        const auto& fb = fd.at(mb.name);
        for (std::size_t i = 0; i < mb.values.size(); ++i) {
            const double a = mb.values[i];
            const double b = fb.values[i];
            const double diff = std::abs(a - b);
            const double mag = std::max(std::abs(a), std::abs(b));
            // Relative agreement, with an absolute floor so that entries close
            // to zero do not demand impossible precision from the differences.
            const double rel = diff / std::max(mag, abs_floor / rel_tol);
            ++res.entries;
            if (rel > res.worst_rel) {
                res.worst_rel = rel;
                res.worst_at = tag + "/" + mb.name + "[" + std::to_string(i) + "]";
            }
            if (diff > std::max(abs_floor, rel_tol * mag)) res.pass = false;
        }
    }
}

}  // namespace detail

// Draws random small networks, inputs, and labels, then verifies the manual
// backward pass of all three losses against central differences. Covers nets
// with zero to two hidden layers, with and without the head bias.
inline GradCheckResult run_gradcheck(std::uint64_t seed, std::size_t instances = 50,
                                     double step = 1e-5, double rel_tol = 1e-4,
                                     double abs_floor = 1e-8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    GradCheckResult res;
    res.instances = instances;
    for (std::size_t n = 0; n < instances; ++n) {
        const std::size_t input_dim = 2 + rng() % 4;
        const std::size_t depth = n % 3;  // cycle 0, 1, 2 hidden layers
        std::vector<std::size_t> widths;
        for (std::size_t d = 0; d < depth; ++d) widths.push_back(3 + rng() % 4);
        const std::size_t classes = 2 + rng() % 4;

        Network net(input_dim, widths);
        net.fc_weight() = Tensor2(classes, net.head_in_dim());
        if (n % 2 == 1) net.enable_fc_bias();
        for (auto& p : net.param_blocks())
            for (std::size_t i = 0; i < p.shape.count(); ++i) p.data[i] = 0.8 * unit(rng);

        Tensor1 x(input_dim);
        for (std::size_t i = 0; i < input_dim; ++i) x[i] = unit(rng) * 2.0;
        const std::size_t label = rng() % classes;
        const Tensor1 y = one_hot(classes, label);
        const std::string tag = "triple" + std::to_string(n);

        ForwardCache cache = forward(net, x);
        detail::compare_grads(
            grad_ce(net, cache, y),
            fd_gradient(net, [&](const Network& m) { return loss_ce(forward(m, x).logits, label); },
                        step),
            rel_tol, abs_floor, tag + "/ce", res);
        detail::compare_grads(
            grad_ce_reversed(net, cache, y),
            fd_gradient(net,
                        [&](const Network& m) {
                            return loss_ce_reversed(forward(m, x).logits, label);
                        },
                        step),
            rel_tol, abs_floor, tag + "/ce_reversed", res);
        if (l2_norm(cache.logits) > 1e-6) {
            detail::compare_grads(
                grad_l2out(net, cache),
                fd_gradient(net,
                            [&](const Network& m) { return loss_l2out(forward(m, x).logits); },
                            step),
                rel_tol, abs_floor, tag + "/l2out", res);
        }
    }
    return res;
}

}  // namespace ewcdr
