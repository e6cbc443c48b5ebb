#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ewcdr/gradcheck.hpp"
#include "ewcdr/regularizer.hpp"

using namespace ewcdr;

namespace {

Network head_only(const Tensor2& w) {
    Network net(w.cols, {});
    net.fc_weight() = w;
    return net;
}

Network random_net(std::size_t input_dim, const std::vector<std::size_t>& widths,
                   std::size_t classes, std::mt19937_64& rng) {
    Network net(input_dim, widths);
    net.fc_weight() = Tensor2(classes, net.head_in_dim());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& p : net.param_blocks())
        for (std::size_t i = 0; i < p.shape.count(); ++i) p.data[i] = u(rng);
    return net;
}

// Anchor with explicit importance values over a 1x2 head.
Anchor tiny_anchor(Network& net, double w0, double w1, double om0, double om1, double lambda) {
    net.fc_weight()(0, 0) = w0;
    net.fc_weight()(0, 1) = w1;
    ImportanceMap omega;
    omega.method = Method::ewc;
    omega.values = BlockValues::zeros_like(net);
    omega.values.at("fc.weight").values = {om0, om1};
    return make_anchor(net, omega, lambda);
}

}  // namespace

TEST(RegLoss, HandComputedExample) {
    // lambda = 2, Omega = [1, 2], deviation [1, 1]:
    // (2/2) * (1*1 + 2*1) = 3.
    Network net = head_only(Tensor2(1, 2));
    Anchor anchor = tiny_anchor(net, 0.0, 0.0, 1.0, 2.0, 2.0);
    Network moved = net;
    moved.fc_weight()(0, 0) = 1.0;
    moved.fc_weight()(0, 1) = 1.0;
    EXPECT_DOUBLE_EQ(reg_loss(anchor, moved), 3.0);
}

TEST(RegLoss, ZeroAtTheAnchor) {
    std::mt19937_64 rng(5);
    Network net = random_net(3, {4}, 2, rng);
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    for (auto& blk : omega.values.blocks())
        std::fill(blk.values.begin(), blk.values.end(), 1.0);
    Anchor anchor = make_anchor(net, omega, 100.0);
    EXPECT_DOUBLE_EQ(reg_loss(anchor, net), 0.0);
}

TEST(RegLoss, ScalesLinearlyInLambda) {
    Network net = head_only(Tensor2(1, 2));
    Anchor a1 = tiny_anchor(net, 0.0, 0.0, 1.0, 2.0, 1.0);
    Anchor a5 = a1;
    a5.lambda = 5.0;
    Network moved = net;
    moved.fc_weight()(0, 0) = 0.5;
    EXPECT_NEAR(reg_loss(a5, moved), 5.0 * reg_loss(a1, moved), 1e-15);
}

TEST(RegGrad, HandComputedExample) {
    // lambda = 2, Omega = 3, theta - ref = 0.5: gradient 2 * 3 * 0.5 = 3.
    Network net = head_only(Tensor2(1, 1));
    net.fc_weight()(0, 0) = 1.0;
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    omega.values.at("fc.weight").values = {3.0};
    Anchor anchor = make_anchor(net, omega, 2.0);
    Network moved = net;
    moved.fc_weight()(0, 0) = 1.5;
    GradientSet g = reg_grad(anchor, moved);
    EXPECT_DOUBLE_EQ(g.at("fc.weight").values[0], 3.0);
}

TEST(RegGrad, MatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    Network net = random_net(3, {4}, 3, rng);
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (auto& blk : omega.values.blocks())
        for (double& v : blk.values) v = u(rng);
    Anchor anchor = make_anchor(net, omega, 7.5);

    Network moved = random_net(3, {4}, 3, rng);
    GradientSet manual = reg_grad(anchor, moved);
    GradientSet fd = fd_gradient(
        moved, [&](const Network& m) { return reg_loss(anchor, m); }, 1e-6);
    for (const auto& blk : manual.blocks()) {
        const auto& other = fd.at(blk.name);
        for (std::size_t i = 0; i < blk.values.size(); ++i)
            EXPECT_NEAR(blk.values[i], other.values[i], 1e-6);
    }
}

TEST(RegGrad, NewHeadRowsCarryNoPenalty) {
    std::mt19937_64 rng(13);
    Network net = random_net(2, {}, 2, rng);
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    for (auto& blk : omega.values.blocks())
        std::fill(blk.values.begin(), blk.values.end(), 1.0);
    Anchor anchor = make_anchor(net, omega, 10.0);

    std::mt19937_64 grow_rng(1);
    Network grown = expand_head(net, 2, 0.5, grow_rng);
    // Move every parameter, old and new.
    for (auto& p : grown.param_blocks())
        for (std::size_t i = 0; i < p.shape.count(); ++i) p.data[i] += 1.0;

    GradientSet g = reg_grad(anchor, grown);
    const auto& head = g.at("fc.weight");
    // Old rows (0, 1) feel lambda * Omega * deviation = 10; new rows stay 0.
    for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_DOUBLE_EQ(head.values[0 * 2 + c], 10.0);
        EXPECT_DOUBLE_EQ(head.values[1 * 2 + c], 10.0);
        EXPECT_DOUBLE_EQ(head.values[2 * 2 + c], 0.0);
        EXPECT_DOUBLE_EQ(head.values[3 * 2 + c], 0.0);
    }
    // And the loss only counts anchored entries: each of the 4 old head
    // entries deviates by 1 with Omega 1, so (10/2) * 4 = 20.
    EXPECT_DOUBLE_EQ(reg_loss(anchor, grown), 20.0);
}

TEST(RegLoss, InvariantUnderBlockOrderPermutation) {
    std::mt19937_64 rng(17);
    Network net = random_net(3, {4, 5}, 3, rng);
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& blk : omega.values.blocks())
        for (double& v : blk.values) v = u(rng);
    Anchor anchor = make_anchor(net, omega, 3.0);
    Network moved = random_net(3, {4, 5}, 3, rng);
    const double base = reg_loss(anchor, moved);

    Anchor permuted = anchor;
    std::reverse(permuted.theta_ref.blocks().begin(), permuted.theta_ref.blocks().end());
    std::reverse(permuted.omega.values.blocks().begin(), permuted.omega.values.blocks().end());
    EXPECT_NEAR(reg_loss(permuted, moved), base, 1e-12 * std::max(1.0, std::abs(base)));
}

TEST(RegGrad, BodyShapeConflictThrows) {
    std::mt19937_64 rng(19);
    Network net = random_net(2, {3}, 2, rng);
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    Anchor anchor = make_anchor(net, omega, 1.0);
    Network other = random_net(2, {4}, 2, rng);
    EXPECT_THROW(reg_grad(anchor, other), validation_error);
    EXPECT_THROW(reg_loss(anchor, other), validation_error);
}

TEST(MakeAnchor, RejectsNegativeLambdaAndForeignOmega) {
    std::mt19937_64 rng(23);
    Network net = random_net(2, {3}, 2, rng);
    ImportanceMap omega;
    omega.values = BlockValues::zeros_like(net);
    EXPECT_THROW(make_anchor(net, omega, -1.0), validation_error);
    Network other = random_net(2, {5}, 2, rng);
    ImportanceMap foreign;
    foreign.values = BlockValues::zeros_like(other);
    EXPECT_THROW(make_anchor(net, foreign, 1.0), validation_error);
}
