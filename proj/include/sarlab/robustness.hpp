#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/nn/graph.hpp"
#include "sarlab/parallel.hpp"
#include "sarlab/training.hpp"

namespace sarlab {

struct AttackConfig {
    int max_iter = 50;
    double overshoot = 0.02;
    std::size_t max_samples = 0;  // evaluate at most this many records; 0 = all
    std::size_t workers = 0;
};

struct PerturbationResult {
    std::vector<float> r_hat;  // accumulated minimal perturbation (input shape)
    int iterations = 0;
    bool success = false;
    double norm_ratio = 0.0;  // ||r_hat||_2 / ||x||_2
    int pred_class = 0;       // prediction on the clean input
    int adv_class = 0;        // prediction at the overshoot point
};

namespace detail {

template <typename T>
double l2_norm(const std::vector<T>& v) {
    double acc = 0.0;
    for (T x : v) acc += double(x) * double(x);
    return std::sqrt(acc);
}

// Classifier logits and their input jacobian rows at the given point.
template <typename T, typename ModelT>
void logits_and_jacobian(const ModelT& model, const std::vector<double>& point,
                         const std::vector<std::size_t>& shape, std::vector<double>& logits,
                         std::vector<std::vector<double>>& jacobian) {
    std::vector<T> x_t(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) x_t[i] = static_cast<T>(point[i]);

    nn::Graph<T> g(/*param_grads=*/false);
    nn::Tensor<T> x = g.input(shape, std::span<const T>(x_t.data(), x_t.size()), /*needs_grad=*/true);
    nn::Tensor<T> out = model.forward_logits(g, x);

    const std::size_t classes = out.size();
    logits.assign(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) logits[c] = double(out.data()[c]);

    jacobian.assign(classes, std::vector<double>(point.size(), 0.0));
    for (std::size_t c = 0; c < classes; ++c) {
        g.backward_component(out, c);
        const auto& grad = x.grad();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double gv = double(grad[i]);
            if (!std::isfinite(gv)) throw std::runtime_error("deepfool: non-finite input gradient");
            jacobian[c][i] = gv;
        }
    }
}

template <typename T, typename ModelT>
int predict_at(const ModelT& model, const std::vector<double>& point,
               const std::vector<std::size_t>& shape) {
    std::vector<T> x_t(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) x_t[i] = static_cast<T>(point[i]);
    nn::Graph<T> g(false);
    nn::Tensor<T> x = g.input(shape, std::span<const T>(x_t.data(), x_t.size()));
    nn::Tensor<T> out = model.forward_logits(g, x);
    return static_cast<int>(std::max_element(out.values().begin(), out.values().end()) -
                            out.values().begin());
}

}  // namespace detail

// Multiclass DeepFool: iteratively projects the input onto the nearest
// linearized decision boundary until the prediction at the overshoot
// point flips or the iteration budget runs out. When the true label is
// supplied and the input is already misclassified, the zero
// perturbation is returned immediately.
template <typename T, typename ModelT>
PerturbationResult deepfool(std::span<const T> input, const ModelT& model, const AttackConfig& cfg = {},
                            std::optional<int> true_label = std::nullopt) {
    const std::vector<std::size_t> shape = model.input_shape();
    std::vector<double> x0(input.begin(), input.end());
    std::vector<double> current = x0;

    PerturbationResult result;
    result.r_hat.assign(x0.size(), 0.0f);

    std::vector<double> logits;
    std::vector<std::vector<double>> jac;
    detail::logits_and_jacobian<T>(model, current, shape, logits, jac);
    const int k0 = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    result.pred_class = k0;
    result.adv_class = k0;

    if (true_label && k0 != *true_label) {
        // already misclassified: nothing to do
        result.success = true;
        result.iterations = 0;
        result.norm_ratio = 0.0;
        return result;
    }

    const double x_norm = detail::l2_norm(std::vector<T>(input.begin(), input.end()));
    std::vector<double> r_total(x0.size(), 0.0);
    const int classes = static_cast<int>(logits.size());

    auto overshoot_point = [&](std::vector<double>& out) {
        out = x0;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (1.0 + cfg.overshoot) * r_total[i];
    };

    std::vector<double> probe;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        if (iter > 0) detail::logits_and_jacobian<T>(model, current, shape, logits, jac);

        // nearest linearized boundary over k != k0
        double best_dist = 0.0;
        int best_k = -1;
        double best_wnorm2 = 0.0;
        for (int k = 0; k < classes; ++k) {
            if (k == k0) continue;
            double wnorm2 = 0.0;
            for (std::size_t i = 0; i < x0.size(); ++i) {
                const double w = jac[k][i] - jac[k0][i];
                wnorm2 += w * w;
            }
            if (wnorm2 < 1e-30) continue;  // parallel logits (e.g. constant model)
            const double f = logits[k] - logits[k0];
            const double dist = std::fabs(f) / std::sqrt(wnorm2);
            if (best_k < 0 || dist < best_dist) {
                best_dist = dist;
                best_k = k;
                best_wnorm2 = wnorm2;
            }
        }
        if (best_k < 0) break;  // no usable boundary direction

        const double f = logits[best_k] - logits[k0];
        const double step = std::fabs(f) / best_wnorm2 + 1e-8;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double w = jac[best_k][i] - jac[k0][i];
            const double delta = step * w;
            r_total[i] += delta;
            current[i] += delta;
        }
        result.iterations = iter + 1;

        overshoot_point(probe);
        const int pred = detail::predict_at<T>(model, probe, shape);
        if (pred != k0) {
            result.success = true;
            result.adv_class = pred;
            break;
        }
    }

    for (std::size_t i = 0; i < r_total.size(); ++i) result.r_hat[i] = static_cast<float>(r_total[i]);
    result.norm_ratio = x_norm > 0.0 ? detail::l2_norm(result.r_hat) / x_norm : 0.0;
    return result;
}

// One-step image-domain FGSM: x' = x + eps * sign(dL/dx).
template <typename T, typename ModelT>
std::vector<T> fgsm_image(std::span<const T> input, int label, const ModelT& model, double epsilon) {
    const std::vector<std::size_t> shape = model.input_shape();
    nn::Graph<T> g(/*param_grads=*/false);
    nn::Tensor<T> x = g.input(shape, input, /*needs_grad=*/true);
    nn::Tensor<T> loss = g.softmax_cross_entropy(model.forward_logits(g, x), std::size_t(label));
    g.backward(loss);

    std::vector<T> out(input.begin(), input.end());
    const auto& grad = x.grad();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double gv = double(grad[i]);
        out[i] += static_cast<T>(epsilon * (gv > 0.0 ? 1.0 : (gv < 0.0 ? -1.0 : 0.0)));
    }
    return out;
}

// --- the robustness metric ---------------------------------------------------

struct AttackRow {
    int sample_id = 0;
    int true_class = 0;
    int pred_class = 0;
    int adv_class = 0;
    int iterations = 0;
    bool success = false;
    double norm_ratio = 0.0;
    double pose = 0.0;  // carried along for the angle-binned report
};

struct RhoReport {
    std::optional<double> rho;  // undefined when no attack succeeded
    std::size_t evaluated = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::vector<AttackRow> rows;
};

inline std::string attack_csv_header() {
    return "sample_id,true_class,pred_class,adv_class,iterations,norm_ratio";
}

inline std::string to_csv_row(const AttackRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%d,%.9g", r.sample_id, r.true_class, r.pred_class,
                  r.adv_class, r.iterations, r.norm_ratio);
    return std::string(buf);
}

// Mean minimal-perturbation ratio over a dataset. Samples where
// DeepFool finds no flip within the budget are excluded from the mean
// and reported separately; an all-failure dataset reports an undefined
// metric rather than zero.
template <typename ModelT>
RhoReport rho_adv(const std::vector<DatasetRecord>& records, const ModelT& model,
                  const AttackConfig& cfg = {}) {
    if (records.empty()) throw std::invalid_argument("rho_adv: empty dataset");
    const std::size_t n =
        cfg.max_samples > 0 ? std::min(cfg.max_samples, records.size()) : records.size();

    RhoReport report;
    report.rows.resize(n);
    parallel_for(n, resolve_workers(cfg.workers), [&](std::size_t i, std::size_t) {
        const DatasetRecord& rec = records[i];
        const PerturbationResult pr =
            deepfool<float>(std::span<const float>(rec.image.data(), rec.image.size()), model, cfg,
                            rec.class_label);
        AttackRow row;
        row.sample_id = rec.record_id;
        row.true_class = rec.class_label;
        row.pred_class = pr.pred_class;
        row.adv_class = pr.adv_class;
        row.iterations = pr.iterations;
        row.success = pr.success;
        row.norm_ratio = pr.norm_ratio;
        row.pose = rec.pose;
        report.rows[i] = row;
    });

    double sum = 0.0;
    for (const AttackRow& row : report.rows) {
        report.evaluated++;
        if (row.success) {
            report.succeeded++;
            sum += row.norm_ratio;
        } else {
            report.failed++;
        }
    }
    if (report.succeeded > 0) report.rho = sum / static_cast<double>(report.succeeded);
    return report;
}

// Ranking helper for the comparison contract: larger rho means more
// robust, so classifiers are ordered by descending rho. Undefined
// metrics sort last.
struct SchemeRho {
    std::string name;
    std::optional<double> rho;
};

inline std::vector<SchemeRho> rank_by_robustness(std::vector<SchemeRho> entries) {
    std::stable_sort(entries.begin(), entries.end(), [](const SchemeRho& a, const SchemeRho& b) {
        if (a.rho.has_value() != b.rho.has_value()) return a.rho.has_value();
        if (!a.rho) return false;
        return *a.rho > *b.rho;
    });
    return entries;
}

}  // namespace sarlab
