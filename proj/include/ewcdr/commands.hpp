#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ewcdr/analysis.hpp"
#include "ewcdr/config.hpp"
#include "ewcdr/errors.hpp"
#include "ewcdr/gradcheck.hpp"
#include "ewcdr/idx.hpp"
#include "ewcdr/io.hpp"
#include "ewcdr/metrics.hpp"
#include "ewcdr/scenario.hpp"
#include "ewcdr/trainer.hpp"

namespace ewcdr {

inline LabeledDataset build_dataset(const DatasetSpec& spec) {
    if (spec.kind == DatasetSpec::Kind::synthetic)
        return make_synthetic(spec.classes, spec.dim, spec.per_class, spec.separation,
                              spec.seed);
    throw validation_error("build_dataset: idx datasets carry separate train/test files; "
                           "use build_stream");
}

inline TaskStream build_stream(const RunConfig& cfg) {
    if (cfg.dataset.kind == DatasetSpec::Kind::synthetic) {
        LabeledDataset data = build_dataset(cfg.dataset);
        if (cfg.protocol.kind == ProtocolSpec::Kind::equal)
            return split_equally(data, cfg.protocol.tasks, cfg.protocol.seed);
        return split_big_start(data, cfg.protocol.initial_classes, cfg.protocol.increment_size,
                               cfg.protocol.seed);
    }
    LabeledDataset train =
        load_idx(cfg.dataset.train_images, cfg.dataset.train_labels, cfg.dataset.normalize);
    LabeledDataset test =
        load_idx(cfg.dataset.test_images, cfg.dataset.test_labels, cfg.dataset.normalize);
    // The two files may disagree on the highest label present; align them.
    const std::size_t classes = std::max(train.num_classes, test.num_classes);
    train.num_classes = test.num_classes = classes;
    if (cfg.protocol.kind == ProtocolSpec::Kind::equal)
        return split_equally(train, test, cfg.protocol.tasks, cfg.protocol.seed);
    return split_big_start(train, test, cfg.protocol.initial_classes,
                           cfg.protocol.increment_size, cfg.protocol.seed);
}

struct SeedResult {
    std::uint64_t seed = 0;
    AccuracyMatrix matrix{1};
    double a_last = 0.0;
    double a_avg = 0.0;
};

struct RunOutcome {
    std::vector<SeedResult> per_seed;
    double mean_a_last = 0.0;
    double mean_a_avg = 0.0;
};

// Runs the configured stream once per seed without touching the filesystem.
inline RunOutcome run_seeds(const RunConfig& cfg) {
    validate(cfg);
    RunOutcome out;
    for (std::uint64_t seed : cfg.seeds) {
        TaskStream stream = build_stream(cfg);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        RunResult res = run_stream(stream, tc);
        SeedResult sr{seed, std::move(res.matrix), 0.0, 0.0};
        sr.a_last = a_last(sr.matrix, cfg.weighting);
        sr.a_avg = a_avg(sr.matrix, cfg.weighting);
        out.per_seed.push_back(std::move(sr));
    }
    for (const auto& sr : out.per_seed) {
        out.mean_a_last += sr.a_last;
        out.mean_a_avg += sr.a_avg;
    }
    out.mean_a_last /= static_cast<double>(out.per_seed.size());
    out.mean_a_avg /= static_cast<double>(out.per_seed.size());
    return out;
}

// `run <config>`: one continual run per seed. Writes, under out_dir:
//   matrix_seed<S>.csv   accuracy triangle per seed
//   aggregate.json       per-seed metrics plus means
//   summary.txt          human-readable tables
// Output contains no timestamps or machine state, so identical configs
// produce identical bytes.
inline RunOutcome cmd_run(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    RunOutcome out = run_seeds(cfg);
    for (const auto& sr : out.per_seed)
        atomic_write_file(out_dir / ("matrix_seed" + std::to_string(sr.seed) + ".csv"),
                          matrix_csv(sr.matrix));

    nlohmann::json agg;
    agg["method"] = method_name(cfg.train.method);
    agg["weighting"] = weighting_name(cfg.weighting);
    agg["mean_a_last"] = out.mean_a_last;
    agg["mean_a_avg"] = out.mean_a_avg;
    agg["per_seed"] = nlohmann::json::array();
    for (const auto& sr : out.per_seed) {
        nlohmann::json e = report_json(sr.matrix, cfg.weighting);
        e["seed"] = sr.seed;
        agg["per_seed"].push_back(std::move(e));
    }
    atomic_write_file(out_dir / "aggregate.json", agg.dump(2) + "\n");

    std::string text = "method " + method_name(cfg.train.method) + ", " +
                       std::to_string(out.per_seed.size()) + " seed(s)\n";
    char buf[96];
    for (const auto& sr : out.per_seed) {
        std::snprintf(buf, sizeof buf, "seed %llu: a_last %.2f, a_avg %.2f\n",
                      static_cast<unsigned long long>(sr.seed), sr.a_last, sr.a_avg);
        text += buf;
        text += matrix_table_text(sr.matrix);
    }
    std::snprintf(buf, sizeof buf, "mean: a_last %.2f, a_avg %.2f\n", out.mean_a_last,
                  out.mean_a_avg);
    text += buf;
    atomic_write_file(out_dir / "summary.txt", text);
    return out;
}

inline RunOutcome cmd_run(const RunConfig& cfg) { return cmd_run(cfg, cfg.output_dir); }

struct SweepPoint {
    double lambda = 0.0;
    double mean_a_last = 0.0;
    double mean_a_avg = 0.0;
};

// `sweep-lambda <config> --lambdas ...`: repeats the configured run for each
// penalty strength and writes sweep_lambda.csv sorted by lambda.
inline std::vector<SweepPoint> cmd_sweep_lambda(const RunConfig& cfg,
                                                std::vector<double> lambdas,
                                                const std::filesystem::path& out_dir) {
    if (lambdas.empty()) throw validation_error("sweep-lambda: no lambda values given");
    for (double l : lambdas)
        if (l < 0.0) throw validation_error("sweep-lambda: lambda must be >= 0");
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    std::vector<SweepPoint> points;
    for (double l : lambdas) {
        RunConfig c = cfg;
        c.train.lambda = l;
        RunOutcome out = run_seeds(c);
        points.push_back({l, out.mean_a_last, out.mean_a_avg});
    }
    std::string csv = "lambda,mean_a_last,mean_a_avg\n";
    for (const auto& p : points)
        csv += format_double(p.lambda) + "," + format_double(p.mean_a_last) + "," +
               format_double(p.mean_a_avg) + "\n";
    atomic_write_file(out_dir / "sweep_lambda.csv", csv);
    return points;
}

// `case-study gradient-vanishing|redundant-protection`: probe-sample
// comparison of the estimators. Writes case_<kind>.csv plus one head heatmap
// SVG per estimator.
inline CaseStudyReport cmd_case_study_gradient_vanishing(const Tensor1& h, double margin,
                                                         std::size_t gt,
                                                         const std::filesystem::path& out_dir) {
    if (margin < 0.0) throw validation_error("case_gradient_vanishing: margin must be >= 0");
    const std::size_t classes = std::max<std::size_t>(2, gt + 1);
    Tensor1 z(classes);
    z[gt] = margin;
    CaseStudyArtifacts art = detail::run_probe_case(z, h, gt);
    atomic_write_file(out_dir / "case_gradient_vanishing.csv", case_study_csv(art.report));
    emit_heatmap_svg(make_heatmap(art.ewc), out_dir / "heatmap_ewc.svg");
    emit_heatmap_svg(make_heatmap(art.mas), out_dir / "heatmap_mas.svg");
    emit_heatmap_svg(make_heatmap(art.ewc_dr), out_dir / "heatmap_ewc_dr.svg");
    return art.report;
}

inline CaseStudyReport cmd_case_study_redundant_protection(
    const Tensor1& z, std::size_t gt, const Tensor1& h,
    const std::filesystem::path& out_dir) {
    CaseStudyReport report = case_redundant_protection(z, gt, h);
    CaseStudyArtifacts art = detail::run_probe_case(z, h, gt);
    atomic_write_file(out_dir / "case_redundant_protection.csv", case_study_csv(report));
    emit_heatmap_svg(make_heatmap(art.ewc), out_dir / "heatmap_ewc.svg");
    emit_heatmap_svg(make_heatmap(art.mas), out_dir / "heatmap_mas.svg");
    emit_heatmap_svg(make_heatmap(art.ewc_dr), out_dir / "heatmap_ewc_dr.svg");
    return report;
}

// `importance-stats <config> --class k`: trains the first task of the
// configured stream, then compares per-class head importance on that class's
// training samples. Writes table_a.csv.
inline TableAStatistics cmd_importance_stats(const RunConfig& cfg, std::size_t cls,
                                             const std::filesystem::path& out_dir) {
    validate(cfg);
    TaskStream stream = build_stream(cfg);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seeds.front();
    ContinualState state = make_state(stream.feature_dim(), tc);
    const LabeledDataset& train = stream.train_split(0);
    train_task(state, train, stream.classes_of(0), tc);
    if (cls >= state.classes_seen)
        throw validation_error("importance-stats: class " + std::to_string(cls) +
                               " is not part of the first task (it has " +
                               std::to_string(state.classes_seen) + " classes)");
    LabeledDataset focus;
    focus.feature_dim = train.feature_dim;
    focus.num_classes = train.num_classes;
    for (const Sample& s : train.samples)
        if (s.label == cls) focus.samples.push_back(s);
    if (focus.empty())
        throw validation_error("importance-stats: no training samples carry class " +
                               std::to_string(cls));
    TableAStatistics stats = table_a_statistics(state.net, focus);
    atomic_write_file(out_dir / "table_a.csv", table_a_csv(stats));
    return stats;
}

}  // namespace ewcdr
