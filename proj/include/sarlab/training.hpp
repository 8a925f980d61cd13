#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/geom.hpp"
#include "sarlab/imaging.hpp"
#include "sarlab/model.hpp"
#include "sarlab/nn/graph.hpp"
#include "sarlab/nn/optim.hpp"
#include "sarlab/parallel.hpp"
#include "sarlab/rfsim.hpp"
#include "sarlab/rng.hpp"

namespace sarlab {

// One dataset entry: the normalized image the classifier consumes plus
// the raw frequency history it was formed from (kept for signal-domain
// attacks), with its labels.
struct DatasetRecord {
    int record_id = 0;
    int target_id = 0;
    int class_label = 0;     // y in 0..3
    double pose = 0.0;       // aspect angle at the aperture center, radians
    double size_scalar = 0.0;
    std::vector<float> image;  // model input, row-major
    FrequencyHistory signal;
};

inline std::vector<float> to_model_input(const RealImage& img) {
    std::vector<float> out(img.v.size());
    for (std::size_t i = 0; i < img.v.size(); ++i) out[i] = static_cast<float>(img.v[i]);
    return out;
}

// --- training schemes -------------------------------------------------------

enum class Scheme : int { Basic = 0, Pose, Sim, PoseSim, Adv, AdvSim };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::Basic: return "BASIC";
        case Scheme::Pose: return "POSE";
        case Scheme::Sim: return "SIM";
        case Scheme::PoseSim: return "POSE+SIM";
        case Scheme::Adv: return "ADV";
        case Scheme::AdvSim: return "ADV+SIM";
    }
    return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
    for (Scheme v : {Scheme::Basic, Scheme::Pose, Scheme::Sim, Scheme::PoseSim, Scheme::Adv, Scheme::AdvSim})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown scheme: " + s);
}

inline const std::vector<Scheme>& all_schemes() {
    static const std::vector<Scheme> v{Scheme::Basic, Scheme::Pose,  Scheme::Sim,
                                       Scheme::PoseSim, Scheme::Adv, Scheme::AdvSim};
    return v;
}

struct PairThresholds {
    double size_tol = 0.5;                  // meters
    double pose_tol = 10.0 * kPi / 180.0;   // radians
};

struct TrainConfig {
    bool with_pose = false;
    bool with_sim = false;
    bool with_adv = false;
    double lambda_pose = 1.0;
    double lambda_sim = 1.0;
    double lambda_adv = 1.0;
    double epsilon_scale = 0.05;  // FGSM step as a fraction of the median |component|
    double epsilon_abs = 0.0;     // absolute FGSM step; overrides the scale when > 0
    PairThresholds thresholds;
    nn::OptimizerConfig<float> optimizer;
    int epochs = 12;
    int batch_size = 32;
    double early_stop_train_acc = 0.0;  // 0 = run all epochs
    std::uint64_t seed = 0;
    std::size_t workers = 0;  // 0 = hardware concurrency
    ImagingConfig imaging;

    void apply_scheme(Scheme s) {
        with_pose = (s == Scheme::Pose || s == Scheme::PoseSim);
        with_sim = (s == Scheme::Sim || s == Scheme::PoseSim || s == Scheme::AdvSim);
        with_adv = (s == Scheme::Adv || s == Scheme::AdvSim);
    }

    Scheme scheme() const {
        if (with_adv) return with_sim ? Scheme::AdvSim : Scheme::Adv;
        if (with_pose) return with_sim ? Scheme::PoseSim : Scheme::Pose;
        return with_sim ? Scheme::Sim : Scheme::Basic;
    }
};

// s = 0 (similar) iff same class AND similar size AND similar pose.
inline int similarity_label(const DatasetRecord& a, const DatasetRecord& b,
                            const PairThresholds& t = {}) {
    const bool similar = a.class_label == b.class_label &&
                         std::fabs(a.size_scalar - b.size_scalar) <= t.size_tol &&
                         circular_distance(a.pose, b.pose) <= t.pose_tol;
    return similar ? 0 : 1;
}

// --- signal-domain FGSM -----------------------------------------------------

// FGSM step size tied to the signal scale: fraction of the median
// absolute real/imaginary component.
inline double fgsm_epsilon(const FrequencyHistory& signal, double scale) {
    std::vector<double> mags;
    mags.reserve(signal.samples().size() * 2);
    for (const Complex& v : signal.samples()) {
        mags.push_back(std::fabs(v.real()));
        mags.push_back(std::fabs(v.imag()));
    }
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    return scale * mags[mags.size() / 2];
}

namespace detail {

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// dL_clf/dx for one image under the given model, via an
// input-gradient-only graph.
template <typename T>
RealImage image_loss_gradient(const AtrModel<T>& model, const std::vector<T>& image, int label,
                              int side) {
    nn::Graph<T> g(/*param_grads=*/false);
    nn::Tensor<T> x = g.input({1, std::size_t(side), std::size_t(side)},
                              std::span<const T>(image.data(), image.size()), /*needs_grad=*/true);
    nn::Tensor<T> loss = g.softmax_cross_entropy(model.forward_logits(g, x), std::size_t(label));
    g.backward(loss);
    RealImage out(side, side);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = static_cast<double>(x.grad()[i]);
    return out;
}

}  // namespace detail

// Perturbs the record's frequency history along the sign of the
// classification-loss gradient, real and imaginary parts independently:
// s' = s + eps * (sign(dL/d re) + i sign(dL/d im)).
template <typename T>
FrequencyHistory fgsm_perturbed_signal(const DatasetRecord& record, const AtrModel<T>& model,
                                       double epsilon, const ImagingConfig& imaging) {
    if (record.signal.samples().empty())
        throw std::invalid_argument("fgsm_signal: record carries no frequency history");
    if (epsilon == 0.0) return record.signal;

    std::vector<T> image(record.image.begin(), record.image.end());
    const RealImage dl_dx =
        detail::image_loss_gradient(model, image, record.class_label, imaging.image_size);
    const FrequencyHistory grad = grad_signal(record.signal, dl_dx, imaging);

    FrequencyHistory perturbed = record.signal;
    for (std::size_t i = 0; i < perturbed.samples().size(); ++i) {
        const Complex gv = grad.samples()[i];
        perturbed.samples()[i] += Complex(epsilon * detail::sign_of(gv.real()),
                                          epsilon * detail::sign_of(gv.imag()));
    }
    return perturbed;
}

// The adversarial training example x' = g(s + eta).
template <typename T>
std::vector<float> fgsm_signal(const DatasetRecord& record, const AtrModel<T>& model, double epsilon,
                               const ImagingConfig& imaging) {
    return to_model_input(signal_to_image(fgsm_perturbed_signal(record, model, epsilon, imaging), imaging));
}

// --- batches ----------------------------------------------------------------

struct TrainBatch {
    std::vector<std::size_t> items;                        // record indices
    std::vector<std::tuple<int, int, int>> pairs;          // (item a, item b, similarity)
};

struct BatchStats {
    double loss = 0.0;
    double clf_correct = 0.0;
    double pose_correct = 0.0;
    double sim_loss_sum = 0.0;   // over pairs
    double adv_loss_sum = 0.0;   // over items
    std::size_t items = 0;
    std::size_t pairs = 0;
};

namespace detail {

struct SampleOutcome {
    double loss_contrib = 0.0;
    double sim_loss = 0.0;
    double adv_loss = 0.0;
    bool clf_correct_a = false, clf_correct_b = false;
    bool pose_correct_a = false, pose_correct_b = false;
};

// Forward (and optionally backward) for one job: either a single item
// or a pair. Gradients accumulate into the supplied model's parameters.
template <typename T>
SampleOutcome run_job(const AtrModel<T>& model, const std::vector<DatasetRecord>& records,
                      const TrainBatch& batch, std::size_t job, const TrainConfig& cfg,
                      bool do_backward) {
    const bool paired = !batch.pairs.empty();
    const int side = cfg.imaging.image_size;
    nn::Graph<T> g;
    SampleOutcome out;

    auto forward_item = [&](std::size_t record_idx, bool& clf_ok, bool& pose_ok) {
        const DatasetRecord& r = records[record_idx];
        if (static_cast<int>(r.image.size()) != side * side)
            throw std::invalid_argument("train: record image does not match the imaging config");
        std::vector<T> img(r.image.begin(), r.image.end());
        nn::Tensor<T> x =
            g.input({1, std::size_t(side), std::size_t(side)}, std::span<const T>(img.data(), img.size()));
        nn::Tensor<T> h = model.features(g, x);
        nn::Tensor<T> logits = model.class_logits(g, h);
        nn::Tensor<T> loss = g.softmax_cross_entropy(logits, std::size_t(r.class_label));

        const auto& lv = logits.values();
        clf_ok = static_cast<int>(std::max_element(lv.begin(), lv.end()) - lv.begin()) == r.class_label;

        if (cfg.with_pose) {
            nn::Tensor<T> plogits = model.pose_logits(g, h);
            const int bin = pose_bin(r.pose);
            nn::Tensor<T> pose_loss = g.softmax_cross_entropy(plogits, std::size_t(bin));
            loss = g.add(loss, g.scale(pose_loss, T(cfg.lambda_pose)));
            const auto& pv = plogits.values();
            pose_ok = static_cast<int>(std::max_element(pv.begin(), pv.end()) - pv.begin()) == bin;
        }
        if (cfg.with_adv) {
            if (r.signal.samples().empty())
                throw std::invalid_argument("train: ADV scheme needs records with frequency histories");
            const double eps = cfg.epsilon_abs > 0.0 ? cfg.epsilon_abs
                                                     : fgsm_epsilon(r.signal, cfg.epsilon_scale);
            const std::vector<float> adv_img = fgsm_signal(r, model, eps, cfg.imaging);
            std::vector<T> adv(adv_img.begin(), adv_img.end());
            nn::Tensor<T> xa = g.input({1, std::size_t(side), std::size_t(side)},
                                       std::span<const T>(adv.data(), adv.size()));
            nn::Tensor<T> adv_loss =
                g.softmax_cross_entropy(model.forward_logits(g, xa), std::size_t(r.class_label));
            out.adv_loss += adv_loss.data()[0];
            loss = g.add(loss, g.scale(adv_loss, T(cfg.lambda_adv)));
        }
        return std::pair<nn::Tensor<T>, nn::Tensor<T>>(loss, h);
    };

    nn::Tensor<T> total;
    if (paired) {
        const auto [ia, ib, s] = batch.pairs[job];
        auto [loss_a, h_a] = forward_item(batch.items[ia], out.clf_correct_a, out.pose_correct_a);
        auto [loss_b, h_b] = forward_item(batch.items[ib], out.clf_correct_b, out.pose_correct_b);
        nn::Tensor<T> per_item =
            g.scale(g.add(loss_a, loss_b), T(1.0 / static_cast<double>(batch.items.size())));
        nn::Tensor<T> sim = g.contrastive_loss(h_a, h_b, s);
        out.sim_loss = sim.data()[0];
        total = g.add(per_item, g.scale(sim, T(cfg.lambda_sim / static_cast<double>(batch.pairs.size()))));
    } else {
        auto [loss_a, h_a] = forward_item(batch.items[job], out.clf_correct_a, out.pose_correct_a);
        total = g.scale(loss_a, T(1.0 / static_cast<double>(batch.items.size())));
    }
    out.loss_contrib = total.data()[0];
    if (do_backward) g.backward(total);
    return out;
}

}  // namespace detail

// Evaluates one batch without updating parameters; the contract-level
// total loss of the configured scheme. Throws when the scheme needs
// data the batch lacks.
template <typename T>
BatchStats total_loss(const AtrModel<T>& model, const std::vector<DatasetRecord>& records,
                      const TrainBatch& batch, const TrainConfig& cfg) {
    if (cfg.with_sim && batch.pairs.empty())
        throw std::invalid_argument("total_loss: SIM scheme needs a batch with pair structure");
    if (cfg.with_pose && !model.has_pose_head())
        throw std::invalid_argument("total_loss: POSE scheme needs a model with a pose head");

    BatchStats stats;
    stats.items = batch.items.size();
    stats.pairs = batch.pairs.size();
    const std::size_t jobs = batch.pairs.empty() ? batch.items.size() : batch.pairs.size();
    for (std::size_t j = 0; j < jobs; ++j) {
        const auto o = detail::run_job(model, records, batch, j, cfg, /*do_backward=*/false);
        stats.loss += o.loss_contrib;
        stats.sim_loss_sum += o.sim_loss;
        stats.adv_loss_sum += o.adv_loss;
        stats.clf_correct += (o.clf_correct_a ? 1 : 0) + (!batch.pairs.empty() && o.clf_correct_b ? 1 : 0);
        stats.pose_correct +=
            (o.pose_correct_a ? 1 : 0) + (!batch.pairs.empty() && o.pose_correct_b ? 1 : 0);
    }
    return stats;
}

// --- the training loop ------------------------------------------------------

struct EpochMetrics {
    int epoch = 0;
    Scheme scheme = Scheme::Basic;
    double loss = 0.0;
    double clf_acc = 0.0;
    std::optional<double> pose_acc;
    std::optional<double> sim_loss;
    std::optional<double> adv_loss;
};

// CSV row layout: epoch, scheme, loss, clf_acc, pose_acc, sim_loss, adv_loss
inline std::string metrics_csv_header() { return "epoch,scheme,loss,clf_acc,pose_acc,sim_loss,adv_loss"; }

inline std::string to_csv_row(const EpochMetrics& m) {
    char buf[256];
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string();
        char b[32];
        std::snprintf(b, sizeof(b), "%.6g", *v);
        return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6g,%.6g,%s,%s,%s", m.epoch, to_string(m.scheme), m.loss,
                  m.clf_acc, opt(m.pose_acc).c_str(), opt(m.sim_loss).c_str(), opt(m.adv_loss).c_str());
    return std::string(buf);
}

struct TrainingError : std::runtime_error {
    int batch_index;
    TrainingError(const std::string& what, int batch) : std::runtime_error(what), batch_index(batch) {}
};

struct TrainResult {
    AtrModel<float> model;
    std::vector<EpochMetrics> metrics;
};

namespace detail {

// Precomputed same-target close-pose pairs for the similar half of SIM
// batches.
inline std::vector<std::pair<std::size_t, std::size_t>> similar_pair_index(
    const std::vector<DatasetRecord>& records, const PairThresholds& t) {
    std::map<int, std::vector<std::size_t>> by_target;
    for (std::size_t i = 0; i < records.size(); ++i) by_target[records[i].target_id].push_back(i);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& [target, idx] : by_target) {
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a + 1; b < idx.size(); ++b)
                if (similarity_label(records[idx[a]], records[idx[b]], t) == 0)
                    pairs.emplace_back(idx[a], idx[b]);
    }
    return pairs;
}

}  // namespace detail

// Builds one training batch. For pair schemes the batch is half similar
// pairs (same target, nearby pose) and half dissimilar ones.
inline TrainBatch make_batch(const std::vector<DatasetRecord>& records,
                             const std::vector<std::size_t>& order, std::size_t start,
                             std::size_t count, const TrainConfig& cfg,
                             const std::vector<std::pair<std::size_t, std::size_t>>& similar_pairs,
                             Rng& rng) {
    TrainBatch batch;
    if (!cfg.with_sim) {
        for (std::size_t i = 0; i < count; ++i) batch.items.push_back(order[(start + i) % order.size()]);
        return batch;
    }
    if (similar_pairs.empty())
        throw std::invalid_argument("train: no similar pairs exist in this dataset at the configured thresholds");
    const std::size_t num_pairs = std::max<std::size_t>(1, count / 2);
    for (std::size_t p = 0; p < num_pairs; ++p) {
        const bool want_similar = p < (num_pairs + 1) / 2;
        std::size_t a = 0, b = 0;
        int s = 1;
        if (want_similar) {
            const auto& pr = similar_pairs[rng.uniform_index(similar_pairs.size())];
            a = pr.first;
            b = pr.second;
            s = 0;
        } else {
            for (int guard = 0;; ++guard) {
                a = rng.uniform_index(records.size());
                b = rng.uniform_index(records.size());
                if (a != b && similarity_label(records[a], records[b], cfg.thresholds) == 1) break;
                if (guard > 1000)
                    throw std::invalid_argument("train: could not sample a dissimilar pair");
            }
            s = 1;
        }
        const int ia = static_cast<int>(batch.items.size());
        batch.items.push_back(a);
        batch.items.push_back(b);
        batch.pairs.emplace_back(ia, ia + 1, s);
    }
    return batch;
}

// Trains a model under the configured scheme. Deterministic for a fixed
// (seed, worker count): jobs are striped over workers, each worker
// accumulates into its own parameter-gradient clone, and clones are
// merged in worker order before each optimizer step.
inline TrainResult train(const std::vector<DatasetRecord>& dataset, const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    {
        bool present[4] = {false, false, false, false};
        for (const auto& r : dataset) present[r.class_label % 4] = true;
        if (!(present[0] && present[1] && present[2] && present[3]))
            throw std::invalid_argument("train: dataset must contain all four classes");
    }

    Rng rng = Rng(cfg.seed).fork(0x7261696e);  // training stream
    Rng init_rng = Rng(cfg.seed).fork(0x696e6974);
    AtrModel<float> model(cfg.with_pose, init_rng);

    const auto similar_pairs =
        cfg.with_sim ? detail::similar_pair_index(dataset, cfg.thresholds)
                     : std::vector<std::pair<std::size_t, std::size_t>>{};

    std::vector<nn::Tensor<float>> params = model.parameters();
    nn::Optimizer<float> optimizer(cfg.optimizer);
    const std::size_t workers = resolve_workers(cfg.workers);

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    const std::size_t steps_per_epoch =
        (dataset.size() + cfg.batch_size - 1) / std::max(1, cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates shuffle with the training stream
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng.uniform_index(i);
            std::swap(order[i - 1], order[j]);
        }

        BatchStats epoch_stats;
        std::size_t epoch_pose_total = 0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const TrainBatch batch = make_batch(dataset, order, step * cfg.batch_size,
                                                std::size_t(cfg.batch_size), cfg, similar_pairs, rng);
            const std::size_t jobs = batch.pairs.empty() ? batch.items.size() : batch.pairs.size();

            // one parameter clone per worker; gradients accumulate there
            std::vector<AtrModel<float>> clones;
            clones.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) clones.push_back(model.clone());
            std::vector<detail::SampleOutcome> outcomes(jobs);
            parallel_for(jobs, workers, [&](std::size_t j, std::size_t w) {
                outcomes[j] = detail::run_job(clones[w], dataset, batch, j, cfg, /*do_backward=*/true);
            });

            // merge worker gradients in worker order
            for (auto& p : params) p.zero_grad();
            for (std::size_t w = 0; w < workers; ++w) {
                const auto wparams = clones[w].parameters();
                for (std::size_t i = 0; i < params.size(); ++i) {
                    if (!wparams[i].has_grad()) continue;
                    const auto& src = wparams[i].grad();
                    auto& dst = params[i].grad();
                    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
                }
            }

            double batch_loss = 0.0;
            for (const auto& o : outcomes) {
                batch_loss += o.loss_contrib;
                epoch_stats.loss += o.loss_contrib;
                epoch_stats.sim_loss_sum += o.sim_loss;
                epoch_stats.adv_loss_sum += o.adv_loss;
                epoch_stats.clf_correct += (o.clf_correct_a ? 1 : 0);
                epoch_stats.pose_correct += (o.pose_correct_a ? 1 : 0);
                if (!batch.pairs.empty()) {
                    epoch_stats.clf_correct += (o.clf_correct_b ? 1 : 0);
                    epoch_stats.pose_correct += (o.pose_correct_b ? 1 : 0);
                }
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("train: non-finite loss", static_cast<int>(step));

            optimizer.step(params);
            epoch_stats.items += batch.items.size();
            epoch_stats.pairs += batch.pairs.size();
            epoch_pose_total += batch.items.size();
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.scheme = cfg.scheme();
        m.loss = epoch_stats.loss / static_cast<double>(steps_per_epoch);
        m.clf_acc = epoch_stats.clf_correct / static_cast<double>(epoch_stats.items);
        if (cfg.with_pose) m.pose_acc = epoch_stats.pose_correct / static_cast<double>(epoch_pose_total);
        if (cfg.with_sim) m.sim_loss = epoch_stats.sim_loss_sum / static_cast<double>(epoch_stats.pairs);
        if (cfg.with_adv) m.adv_loss = epoch_stats.adv_loss_sum / static_cast<double>(epoch_stats.items);
        result.metrics.push_back(m);

        if (cfg.early_stop_train_acc > 0.0 && m.clf_acc >= cfg.early_stop_train_acc) break;
    }

    result.model = std::move(model);
    return result;
}

// Held-out classification accuracy, evaluated in parallel.
inline double evaluate_accuracy(const AtrModel<float>& model, const std::vector<DatasetRecord>& records,
                                std::size_t workers = 0) {
    if (records.empty()) return 0.0;
    std::vector<int> correct(records.size(), 0);
    parallel_for(records.size(), resolve_workers(workers), [&](std::size_t i, std::size_t) {
        correct[i] = model.predict_class(records[i].image) == records[i].class_label ? 1 : 0;
    });
    long total = 0;
    for (int c : correct) total += c;
    return static_cast<double>(total) / static_cast<double>(records.size());
}

}  // namespace sarlab
