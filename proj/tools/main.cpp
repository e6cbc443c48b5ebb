// Command-line front end. Subcommands:
//   run <config>                         continual run, one pass per seed
//   sweep-lambda <config> --lambdas ...  penalty-strength sweep
//   case-study <kind> [...]              estimator probe comparisons
//   gradcheck [--seed n]                 finite-difference check of backward
//   importance-stats <config> --class k  per-class head importance table
//
// Exit codes: 0 success, 1 runtime failure (including a failed gradcheck),
// 2 unusable arguments or config. EWCDR_OUTPUT_DIR overrides the output
// directory from the config or flags.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ewcdr/ewcdr.hpp"

namespace {

std::string output_override(const std::string& configured) {
    const char* env = std::getenv("EWCDR_OUTPUT_DIR");
    return env && *env ? std::string(env) : configured;
}

ewcdr::Tensor1 parse_vector(const std::string& csv, const char* what) {
    ewcdr::Tensor1 out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= csv.size(); ++i) {
        if (i == csv.size() || csv[i] == ',') {
            const std::string item = csv.substr(start, i - start);
            start = i + 1;
            if (item.empty()) continue;
            try {
                std::size_t used = 0;
                out.data.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ewcdr::config_error(std::string(what) + ": cannot parse number '" + item +
                                          "'");
            }
        }
    }
    if (out.size() == 0) throw ewcdr::config_error(std::string(what) + ": empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual-learning importance and regularization toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string lambdas_csv;
    std::string kind;
    std::string logits_csv = "5,1,-8";
    std::string h_csv = "1,0";
    std::string out_flag = "out";
    double margin = 6.0;
    std::size_t gt = 0;
    std::size_t cls = 0;
    std::uint64_t seed = 1;

    CLI::App* run = app.add_subcommand("run", "train a continual stream per the config");
    run->add_option("config", config_path, "run configuration file")->required();

    CLI::App* sweep = app.add_subcommand("sweep-lambda", "repeat a run over penalty strengths");
    sweep->add_option("config", config_path, "run configuration file")->required();
    sweep->add_option("--lambdas", lambdas_csv, "comma-separated lambda values")->required();

    CLI::App* cs = app.add_subcommand("case-study", "probe-sample estimator comparison");
    cs->add_option("kind", kind, "gradient-vanishing or redundant-protection")->required();
    cs->add_option("--margin", margin, "ground-truth logit margin (gradient-vanishing)");
    cs->add_option("--logits", logits_csv, "probe logits (redundant-protection)");
    cs->add_option("--gt", gt, "ground-truth class index");
    cs->add_option("--features", h_csv, "probe feature vector");
    cs->add_option("--out", out_flag, "output directory");

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gc->add_option("--seed", seed, "seed for the random instances");

    CLI::App* stats = app.add_subcommand("importance-stats",
                                         "per-class head importance after the first task");
    stats->add_option("config", config_path, "run configuration file")->required();
    stats->add_option("--class", cls, "class whose samples to analyze")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            ewcdr::RunConfig cfg = ewcdr::parse_config_file(config_path);
            const std::string out_dir = output_override(cfg.output_dir);
            ewcdr::RunOutcome outcome = ewcdr::cmd_run(cfg, out_dir);
            std::printf("%zu seed(s): mean a_last %.2f, mean a_avg %.2f\n",
                        outcome.per_seed.size(), outcome.mean_a_last, outcome.mean_a_avg);
            std::printf("reports in %s\n", out_dir.c_str());
        } else if (sweep->parsed()) {
            ewcdr::RunConfig cfg = ewcdr::parse_config_file(config_path);
            const std::string out_dir = output_override(cfg.output_dir);
            std::vector<double> lambdas;
            for (double v : parse_vector(lambdas_csv, "--lambdas").data) {
                lambdas.push_back(v);
            }
            auto points = ewcdr::cmd_sweep_lambda(cfg, lambdas, out_dir);
            for (const auto& p : points)
                std::printf("lambda %-10g mean a_last %.2f  mean a_avg %.2f\n", p.lambda,
                            p.mean_a_last, p.mean_a_avg);
            std::printf("sweep written to %s\n", out_dir.c_str());
        } else if (cs->parsed()) {
            const std::string out_dir = output_override(out_flag);
            ewcdr::Tensor1 h = parse_vector(h_csv, "--features");
            ewcdr::CaseStudyReport report;
            if (kind == "gradient-vanishing") {
                report = ewcdr::cmd_case_study_gradient_vanishing(h, margin, gt, out_dir);
            } else if (kind == "redundant-protection") {
                ewcdr::Tensor1 z = parse_vector(logits_csv, "--logits");
                report = ewcdr::cmd_case_study_redundant_protection(z, gt, h, out_dir);
            } else {
                throw ewcdr::config_error(
                    "case-study kind must be gradient-vanishing or redundant-protection");
            }
            std::printf("class      p        p~       ewc          mas          ewc_dr\n");
            for (std::size_t k = 0; k < report.logits.size(); ++k)
                std::printf("%-5zu %8.4f %8.4f  %-12.6g %-12.6g %-12.6g\n", k, report.p[k],
                            report.p_tilde[k], report.per_class_ewc[k],
                            report.per_class_mas[k], report.per_class_ewcdr[k]);
            for (std::size_t k : report.flagged)
                std::printf("flagged: class %zu is protected by mas but idle\n", k);
            std::printf("artifacts in %s\n", out_dir.c_str());
        } else if (gc->parsed()) {
            ewcdr::GradCheckResult res = ewcdr::run_gradcheck(seed);
            std::printf("%zu instances, %zu gradient entries, worst relative error %.3g\n",
                        res.instances, res.entries, res.worst_rel);
            if (!res.pass) {
                std::printf("FAIL at %s\n", res.worst_at.c_str());
                return 1;
            }
            std::printf("PASS\n");
        } else if (stats->parsed()) {
            ewcdr::RunConfig cfg = ewcdr::parse_config_file(config_path);
            const std::string out_dir = output_override(cfg.output_dir);
            ewcdr::TableAStatistics t = ewcdr::cmd_importance_stats(cfg, cls, out_dir);
            std::printf("class  ewc           mas           ewc_dr\n");
            for (std::size_t k = 0; k < t.ewc.size(); ++k)
                std::printf("%-5zu  %-12.6g  %-12.6g  %-12.6g\n", k, t.ewc[k], t.mas[k],
                            t.ewc_dr[k]);
            std::printf("table written to %s\n", out_dir.c_str());
        }
    } catch (const ewcdr::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ewcdr::validation_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
