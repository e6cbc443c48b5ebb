#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>

#include "ewcdr/analysis.hpp"
#include "ewcdr/io.hpp"

using namespace ewcdr;

namespace {

std::filesystem::path temp_dir() {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("ewcdr_analysis_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(GradientVanishing, ProbeReproducesRequestedLogits) {
    CaseStudyReport r = case_gradient_vanishing(Tensor1{1.0, 0.0}, 2.0);
    ASSERT_EQ(r.logits.size(), 2u);
    EXPECT_DOUBLE_EQ(r.logits[0], 2.0);
    EXPECT_DOUBLE_EQ(r.logits[1], 0.0);
    EXPECT_EQ(r.gt, 0u);
    EXPECT_NEAR(r.p[0] + r.p[1], 1.0, 1e-15);
    EXPECT_NEAR(r.p_tilde[0] + r.p_tilde[1], 1.0, 1e-15);
    // softmax(-z) mirrors softmax(z) in two dimensions
    EXPECT_NEAR(r.p_tilde[0], r.p[1], 1e-15);
}

TEST(GradientVanishing, MarginTwoReferenceValues) {
    CaseStudyReport r = case_gradient_vanishing(Tensor1{1.0, 0.0}, 2.0);
    // Standard Fisher sees (1 - sigmoid(2))^2, the reversed loss sigmoid(2)^2.
    EXPECT_NEAR(r.per_class_ewc[0], 0.0142, 1e-4);
    EXPECT_NEAR(r.per_class_ewcdr[0], 0.7758, 1e-4);
    const double expect_ewc = std::pow(1.0 - sigmoid(2.0), 2.0);
    const double expect_dr = std::pow(sigmoid(2.0), 2.0);
    EXPECT_NEAR(r.per_class_ewc[0], expect_ewc, 1e-12);
    EXPECT_NEAR(r.per_class_ewcdr[0], expect_dr, 1e-12);
    // e^4, the gap the reversal buys at margin 2
    EXPECT_NEAR(r.per_class_ewcdr[0] / r.per_class_ewc[0], 54.598150033144236, 1e-9);
}

TEST(GradientVanishing, MarginSweepSeparatesTheEstimators) {
    const double margins[] = {0.0, 1.0, 2.0, 4.0, 8.0, 16.0};
    double prev_ewc = 1e300, prev_dr = -1.0;
    double last_ewc = 0.0, last_dr = 0.0;
    for (double m : margins) {
        CaseStudyReport r = case_gradient_vanishing(Tensor1{1.0, 0.0}, m);
        last_ewc = r.per_class_ewc[0];
        last_dr = r.per_class_ewcdr[0];
        EXPECT_LT(last_ewc, prev_ewc) << "margin " << m;
        EXPECT_GT(last_dr, prev_dr) << "margin " << m;
        prev_ewc = last_ewc;
        prev_dr = last_dr;
    }
    EXPECT_LT(last_ewc, 1e-10);  // confident sample: nothing left to protect
    EXPECT_GT(last_dr, 0.999);   // reversal saturates instead
}

TEST(GradientVanishing, ZeroMarginMakesBothEstimatorsAgree) {
    CaseStudyReport r = case_gradient_vanishing(Tensor1{1.0, 0.0}, 0.0);
    EXPECT_DOUBLE_EQ(r.per_class_ewc[0], 0.25);
    EXPECT_DOUBLE_EQ(r.per_class_ewcdr[0], 0.25);
}

TEST(GradientVanishing, LaterGroundTruthWidensTheHead) {
    CaseStudyReport r = case_gradient_vanishing(Tensor1{1.0, 0.0}, 6.0, 2);
    ASSERT_EQ(r.logits.size(), 3u);
    EXPECT_DOUBLE_EQ(r.logits[2], 6.0);
    EXPECT_DOUBLE_EQ(r.logits[0], 0.0);
    // The reversed estimator keeps the confident class on top; the standard
    // one has already let it fade.
    EXPECT_GT(r.per_class_ewcdr[2], r.per_class_ewcdr[0]);
    EXPECT_LT(r.per_class_ewc[2], r.per_class_ewcdr[2]);
}

TEST(GradientVanishing, ValidatesArguments) {
    EXPECT_THROW(case_gradient_vanishing(Tensor1{1.0, 0.0}, -1.0), validation_error);
    EXPECT_THROW(case_gradient_vanishing(Tensor1{0.0, 0.0}, 2.0), validation_error);
}

TEST(RedundantProtection, FlagsTheStronglyNegativeClass) {
    for (std::size_t gt : {std::size_t{0}, std::size_t{1}}) {
        CaseStudyReport r = case_redundant_protection(Tensor1{5.0, 1.0, -8.0}, gt,
                                                      Tensor1{1.0, 0.0});
        EXPECT_EQ(r.flagged, std::vector<std::size_t>{2}) << "gt " << gt;
    }
}

TEST(RedundantProtection, ReferenceCaseRankings) {
    CaseStudyReport r = case_redundant_protection(Tensor1{5.0, 1.0, -8.0}, 0,
                                                  Tensor1{1.0, 0.0});
    // l2-output importance follows |z|: the -8 class outranks the +1 class.
    const double norm = std::sqrt(90.0);
    EXPECT_NEAR(r.per_class_mas[0], 5.0 / norm, 1e-12);
    EXPECT_NEAR(r.per_class_mas[1], 1.0 / norm, 1e-12);
    EXPECT_NEAR(r.per_class_mas[2], 8.0 / norm, 1e-12);
    EXPECT_GT(r.per_class_mas[2], r.per_class_mas[1]);
    // The reversed estimator puts the ground-truth class first instead.
    EXPECT_GT(r.per_class_ewcdr[0], r.per_class_ewcdr[1]);
    EXPECT_GT(r.per_class_ewcdr[0], r.per_class_ewcdr[2]);
}

TEST(RedundantProtection, NothingToFlagWithoutNegativeLogits) {
    CaseStudyReport r = case_redundant_protection(Tensor1{3.0, 4.0}, 1, Tensor1{1.0, 0.0});
    EXPECT_TRUE(r.flagged.empty());
    EXPECT_DOUBLE_EQ(r.logits[0], 3.0);
    EXPECT_DOUBLE_EQ(r.logits[1], 4.0);
}

TEST(RedundantProtection, EqualLogitsNeverInvertAnyRanking) {
    // All logits below the threshold but tied everywhere: the flag demands a
    // strict inversion, so nothing fires.
    CaseStudyReport r = case_redundant_protection(Tensor1{-1.0, -1.0, -1.0}, 0,
                                                  Tensor1{1.0, 0.0});
    EXPECT_TRUE(r.flagged.empty());
}

TEST(RedundantProtection, ValidatesArguments) {
    EXPECT_THROW(case_redundant_protection(Tensor1{1.0}, 0, Tensor1{1.0}), validation_error);
    EXPECT_THROW(case_redundant_protection(Tensor1{1.0, 2.0}, 2, Tensor1{1.0}),
                 validation_error);
    EXPECT_THROW(case_redundant_protection(Tensor1{1.0, 2.0}, 0, Tensor1{0.0, 0.0}),
                 validation_error);
}

TEST(ProbeCase, GeneralFeatureVectorStillReproducesLogits) {
    CaseStudyReport r = case_redundant_protection(Tensor1{2.0, -3.0, 0.5}, 0,
                                                  Tensor1{0.3, 0.4});
    EXPECT_NEAR(r.logits[0], 2.0, 1e-12);
    EXPECT_NEAR(r.logits[1], -3.0, 1e-12);
    EXPECT_NEAR(r.logits[2], 0.5, 1e-12);
}

TEST(TableA, MatchesTheUnderlyingEstimators) {
    Network net(2, {});
    net.fc_weight() = Tensor2{{2.0, 0.0}, {0.0, -1.0}};
    LabeledDataset ds;
    ds.feature_dim = 2;
    ds.num_classes = 2;
    ds.samples.push_back({Tensor1{1.0, 0.0}, 0});
    ds.samples.push_back({Tensor1{0.0, 1.0}, 1});

    TableAStatistics t = table_a_statistics(net, ds);
    EXPECT_EQ(t.ewc, per_class_head_importance(fim_ewc(net, ds)));
    EXPECT_EQ(t.mas, per_class_head_importance(importance_mas(net, ds)));
    EXPECT_EQ(t.ewc_dr, per_class_head_importance(fim_ewc_dr(net, ds)));
    ASSERT_EQ(t.ewc.size(), 2u);
}

TEST(CaseStudyCsv, FrozenTinyCase) {
    CaseStudyReport r = case_gradient_vanishing(Tensor1{1.0, 0.0}, 0.0);
    EXPECT_EQ(case_study_csv(r),
              "class,p,p_tilde,omega_ewc,omega_mas,omega_ewcdr\n"
              "0,0.5,0.5,0.25,0,0.25\n"
              "1,0.5,0.5,0.25,0,0.25\n");
}

TEST(TableACsv, FrozenTinyCase) {
    TableAStatistics t;
    t.ewc = {1.0};
    t.mas = {0.5};
    t.ewc_dr = {0.25};
    EXPECT_EQ(table_a_csv(t),
              "method,class,row_sum\n"
              "ewc,0,1\n"
              "mas,0,0.5\n"
              "ewc_dr,0,0.25\n");
}

TEST(Heatmap, GridMirrorsTheHeadBlock) {
    ImportanceMap omega;
    omega.method = Method::mas;
    omega.values = BlockValues();
    omega.values.blocks().push_back(
        {"fc.weight", BlockShape{2, 2, true}, {1.0, 2.0, 3.0, 4.0}});
    ImportanceHeatmap hm = make_heatmap(omega);
    EXPECT_EQ(hm.method, Method::mas);
    EXPECT_EQ(hm.values.rows, 2u);
    EXPECT_EQ(hm.values.cols, 2u);
    EXPECT_DOUBLE_EQ(hm.values(1, 0), 3.0);

    ImportanceMap headless;
    EXPECT_THROW(make_heatmap(headless), validation_error);
}

TEST(Heatmap, SvgUsesRampEndpointsAndStaysDeterministic) {
    ImportanceHeatmap hm;
    hm.method = Method::ewc_dr;
    hm.values = Tensor2{{0.0, 1.0}};
    const std::string svg = heatmap_svg(hm);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("#313695"), std::string::npos);  // low end
    EXPECT_NE(svg.find("#a50026"), std::string::npos);  // high end
    EXPECT_NE(svg.find("ewc_dr"), std::string::npos);
    EXPECT_EQ(svg, heatmap_svg(hm));
}

TEST(Heatmap, ConstantGridRendersTheMidpoint) {
    ImportanceHeatmap hm;
    hm.values = Tensor2{{0.7, 0.7}, {0.7, 0.7}};
    const std::string svg = heatmap_svg(hm);
    std::size_t hits = 0;
    for (std::size_t pos = svg.find("#ffffbf"); pos != std::string::npos;
         pos = svg.find("#ffffbf", pos + 1))
        ++hits;
    EXPECT_GE(hits, 4u);  // one per cell, and the legend midpoint
}

TEST(Heatmap, EmitWritesTheExactBytes) {
    auto dir = temp_dir();
    ImportanceHeatmap hm;
    hm.method = Method::ewc;
    hm.values = Tensor2{{0.0, 2.0}, {1.0, 3.0}};
    const auto path = dir / "sub" / "heatmap.svg";
    emit_heatmap_svg(hm, path);
    EXPECT_EQ(read_file(path), heatmap_svg(hm));
    emit_heatmap_svg(hm, path);  // overwrite in place
    EXPECT_EQ(read_file(path), heatmap_svg(hm));
    std::filesystem::remove_all(dir);
}
