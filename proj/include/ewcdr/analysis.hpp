#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"
#include "ewcdr/importance.hpp"
#include "ewcdr/io.hpp"
#include "ewcdr/network.hpp"

namespace ewcdr {

// Side-by-side view of what the three single-pass estimators would protect
// for one probe sample. per_class_* are head-row importance sums.
struct CaseStudyReport {
    Tensor1 logits;
    Tensor1 p;        // softmax(z)
    Tensor1 p_tilde;  // softmax(-z)
    std::size_t gt = 0;
    std::vector<double> per_class_ewc;
    std::vector<double> per_class_mas;
    std::vector<double> per_class_ewcdr;
    // Classes whose logit is strongly negative yet ranked higher by the
    // l2-output estimator than by the reversed one. Only the redundant
    // protection study fills this.
    std::vector<std::size_t> flagged;
};

struct CaseStudyArtifacts {
    CaseStudyReport report;
    ImportanceMap ewc;
    ImportanceMap mas;
    ImportanceMap ewc_dr;
};

namespace detail {

// Head-only network built so that forward(h) reproduces exactly the wanted
// logits: w = z h^T / ||h||^2. With h = e_j this makes head row k carry z_k
// in one coordinate, which keeps the per-class sums easy to read.
inline Network probe_network(const Tensor1& logits, const Tensor1& h) {
    double hh = 0.0;
    for (double v : h.data) hh += v * v;
    if (hh == 0.0) throw validation_error("case study: probe feature vector must be nonzero");
    Network net(h.size(), {});
    Tensor2 w(logits.size(), h.size());
    for (std::size_t r = 0; r < logits.size(); ++r)
        for (std::size_t c = 0; c < h.size(); ++c) w(r, c) = logits[r] * h[c] / hh;
    net.fc_weight() = std::move(w);
    return net;
}

inline CaseStudyArtifacts run_probe_case(const Tensor1& z, const Tensor1& h, std::size_t gt) {
    if (z.size() < 2) throw validation_error("case study: need at least two classes");
    if (gt >= z.size()) throw validation_error("case study: ground-truth class out of range");
    Network net = probe_network(z, h);
    LabeledDataset ds;
    ds.feature_dim = h.size();
    ds.num_classes = z.size();
    ds.samples.push_back({h, gt});

    CaseStudyArtifacts art{{}, fim_ewc(net, ds), importance_mas(net, ds), fim_ewc_dr(net, ds)};
    art.report.logits = forward(net, h).logits;
    art.report.p = softmax(art.report.logits);
    art.report.p_tilde = softmax(negated(art.report.logits));
    art.report.gt = gt;
    art.report.per_class_ewc = per_class_head_importance(art.ewc);
    art.report.per_class_mas = per_class_head_importance(art.mas);
    art.report.per_class_ewcdr = per_class_head_importance(art.ewc_dr);
    return art;
}

}  // namespace detail

// How the estimators behave as the ground-truth logit pulls away from the
// rest: logits are zero except z_gt = margin. As the margin grows the
// standard Fisher signal collapses while the reversed one saturates.
inline CaseStudyReport case_gradient_vanishing(const Tensor1& h, double margin,
                                               std::size_t gt = 0) {
    if (margin < 0.0) throw validation_error("case_gradient_vanishing: margin must be >= 0");
    const std::size_t classes = std::max<std::size_t>(2, gt + 1);
    Tensor1 z(classes);
    z[gt] = margin;
    return detail::run_probe_case(z, h, gt).report;
}

// Checks a logit vector for classes the l2-output estimator over-protects:
// strongly negative logits (below -||z||_inf / 2) still produce a large
// |z_k| signal even though the class is far from the decision. Such a class
// is flagged when the l2 estimator orders it strictly above some class that
// the reversed estimator orders strictly below.
inline CaseStudyReport case_redundant_protection(const Tensor1& z, std::size_t gt,
                                                 const Tensor1& h) {
    CaseStudyReport report = detail::run_probe_case(z, h, gt).report;
    double zmax = 0.0;
    for (double v : z.data) zmax = std::max(zmax, std::abs(v));
    const double threshold = -zmax / 2.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (!(z[k] < threshold)) continue;
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (report.per_class_mas[k] > report.per_class_mas[j] &&
                report.per_class_ewcdr[k] < report.per_class_ewcdr[j]) {
                report.flagged.push_back(k);
                break;
            }
        }
    }
    return report;
}

// Per-class head-row importance sums for the three estimators on one
// dataset, typically the samples of a single class.
struct TableAStatistics {
    std::vector<double> ewc;
    std::vector<double> mas;
    std::vector<double> ewc_dr;
};

inline TableAStatistics table_a_statistics(const Network& net, const LabeledDataset& data) {
    return {per_class_head_importance(fim_ewc(net, data)),
            per_class_head_importance(importance_mas(net, data)),
            per_class_head_importance(fim_ewc_dr(net, data))};
}

inline std::string case_study_csv(const CaseStudyReport& r) {
    std::string out = "class,p,p_tilde,omega_ewc,omega_mas,omega_ewcdr\n";
    for (std::size_t k = 0; k < r.logits.size(); ++k) {
        out += std::to_string(k);
        out += ',';
        out += format_double(r.p[k]);
        out += ',';
        out += format_double(r.p_tilde[k]);
        out += ',';
        out += format_double(r.per_class_ewc[k]);
        out += ',';
        out += format_double(r.per_class_mas[k]);
        out += ',';
        out += format_double(r.per_class_ewcdr[k]);
        out += '\n';
    }
    return out;
}

inline std::string table_a_csv(const TableAStatistics& t) {
    std::string out = "method,class,row_sum\n";
    auto emit = [&out](const char* name, const std::vector<double>& rows) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            out += name;
            out += ',';
            out += std::to_string(k);
            out += ',';
            out += format_double(rows[k]);
            out += '\n';
        }
    };
    emit("ewc", t.ewc);
    emit("mas", t.mas);
    emit("ewc_dr", t.ewc_dr);
    return out;
}

// Head importance as a class-by-feature grid for rendering.
struct ImportanceHeatmap {
    Tensor2 values;
    Method method = Method::ewc;
};

inline ImportanceHeatmap make_heatmap(const ImportanceMap& omega) {
    const BlockValues::Block* head = omega.values.find("fc.weight");
    if (!head) throw validation_error("make_heatmap: no fc.weight block");
    ImportanceHeatmap hm;
    hm.method = omega.method;
    hm.values = Tensor2(head->shape.rows, head->shape.cols);
    hm.values.data = head->values;
    return hm;
}

namespace detail {

// Two-segment blue -> pale -> red ramp.
inline std::string heat_color(double t) {
    const double lo[3] = {49, 54, 149};
    const double mid[3] = {255, 255, 191};
    const double hi[3] = {165, 0, 38};
    double rgb[3];
    if (t < 0.5) {
        const double u = t * 2.0;
        for (int i = 0; i < 3; ++i) rgb[i] = lo[i] + (mid[i] - lo[i]) * u;
    } else {
        const double u = (t - 0.5) * 2.0;
        for (int i = 0; i < 3; ++i) rgb[i] = mid[i] + (hi[i] - mid[i]) * u;
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(rgb[0] + 0.5),
                  static_cast<int>(rgb[1] + 0.5), static_cast<int>(rgb[2] + 0.5));
    return buf;
}

}  // namespace detail

// Self-contained SVG. All numbers print through fixed formatting, so the
// same heatmap always yields the same bytes. A constant matrix renders in
// the ramp midpoint.
inline std::string heatmap_svg(const ImportanceHeatmap& hm) {
    if (hm.values.rows == 0 || hm.values.cols == 0)
        throw validation_error("heatmap: empty grid");
    double lo = hm.values.data[0], hi = hm.values.data[0];
    for (double v : hm.values.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    const int cell = 18;
    const int left = 46, top = 34, legend = 46;
    const int width = left + cell * static_cast<int>(hm.values.cols) + 16;
    const int height = top + cell * static_cast<int>(hm.values.rows) + legend;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(left) + "\" y=\"20\" font-family=\"monospace\" "
           "font-size=\"13\">head importance (" + method_name(hm.method) + ")</text>\n";
    for (std::size_t r = 0; r < hm.values.rows; ++r) {
        svg += "<text x=\"6\" y=\"" +
               std::to_string(top + cell * static_cast<int>(r) + cell - 5) +
               "\" font-family=\"monospace\" font-size=\"11\">c" + std::to_string(r) +
               "</text>\n";
        for (std::size_t c = 0; c < hm.values.cols; ++c) {
            const double v = hm.values(r, c);
            const double t = range == 0.0 ? 0.5 : (v - lo) / range;
            svg += "<rect x=\"" + std::to_string(left + cell * static_cast<int>(c)) +
                   "\" y=\"" + std::to_string(top + cell * static_cast<int>(r)) + "\" width=\"" +
                   std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
                   detail::heat_color(t) + "\"><title>" + format_double_short(v) +
                   "</title></rect>\n";
        }
    }
    const int bar_y = top + cell * static_cast<int>(hm.values.rows) + 14;
    for (int i = 0; i < 100; ++i) {
        svg += "<rect x=\"" + std::to_string(left + i * 2) + "\" y=\"" + std::to_string(bar_y) +
               "\" width=\"2\" height=\"10\" fill=\"" + detail::heat_color(i / 99.0) +
               "\"/>\n";
    }
    svg += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(bar_y + 24) +
           "\" font-family=\"monospace\" font-size=\"11\">" + format_double_short(lo) +
           "</text>\n";
    svg += "<text x=\"" + std::to_string(left + 200) + "\" y=\"" + std::to_string(bar_y + 24) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" +
           format_double_short(hi) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

inline void emit_heatmap_svg(const ImportanceHeatmap& hm, const std::filesystem::path& path) {
    atomic_write_file(path, heatmap_svg(hm));
}

}  // namespace ewcdr
