#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sarlab/nn/gemm.hpp"
#include "sarlab/nn/tensor.hpp"

namespace sarlab::nn {

struct ConvSpec {
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;

    void validate() const {
        if (out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
            throw std::invalid_argument("conv spec: non-positive dimension");
    }
};

inline int conv_output_size(int input, int kernel, int stride, int padding) {
    const int span = input + 2 * padding - kernel;
    if (span < 0) throw std::invalid_argument("conv: kernel larger than padded input");
    return span / stride + 1;
}

// Define-by-run reverse-mode tape. Forward calls record backward
// closures in creation order; backward(loss) walks them once in
// reverse. A tape drives exactly one training backward; the
// jacobian-style backward_component() may re-walk an intact tape any
// number of times (it rezeroes every touched gradient first).
template <typename T>
class Graph {
public:
    // param_grads = false skips all weight-gradient work, for attack
    // graphs that only need gradients with respect to the input.
    explicit Graph(bool param_grads = true) : param_grads_(param_grads) {}

    Tensor<T> input(std::vector<std::size_t> shape, std::span<const T> data, bool needs_grad = false) {
        Tensor<T> t = Tensor<T>::from(std::move(shape), data);
        t.set_needs_grad(needs_grad);
        if (needs_grad) {
            t.ensure_grad();
            track(t);
        }
        return t;
    }

    // --- layers ---------------------------------------------------------

    Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> b, const ConvSpec& spec) {
        spec.validate();
        if (x.shape().size() != 3) throw std::invalid_argument("conv: input must be C x H x W");
        const int cin = static_cast<int>(x.shape()[0]);
        const int h = static_cast<int>(x.shape()[1]);
        const int wd = static_cast<int>(x.shape()[2]);
        const int cout = spec.out_channels;
        const int k = spec.kernel;
        if (w.shape() != std::vector<std::size_t>{std::size_t(cout), std::size_t(cin), std::size_t(k), std::size_t(k)})
            throw std::invalid_argument("conv: weight shape mismatch");
        if (b.shape() != std::vector<std::size_t>{std::size_t(cout)})
            throw std::invalid_argument("conv: bias shape mismatch");

        const int ho = conv_output_size(h, k, spec.stride, spec.padding);
        const int wo = conv_output_size(wd, k, spec.stride, spec.padding);
        const std::size_t col_rows = std::size_t(cin) * k * k;
        const std::size_t col_cols = std::size_t(ho) * wo;

        Tensor<T> y = make_node({std::size_t(cout), std::size_t(ho), std::size_t(wo)},
                                wants_grad(x) || wants_grad(w) || wants_grad(b));

        // forward: y = W_mat * col(x) + bias
        std::vector<T>& col = scratch_a_;
        col.assign(col_rows * col_cols, T(0));
        im2col(x.data(), cin, h, wd, k, spec.stride, spec.padding, ho, wo, col.data());
        T* ydata = y.data();
        for (int c = 0; c < cout; ++c)
            std::fill(ydata + std::size_t(c) * col_cols, ydata + std::size_t(c + 1) * col_cols, b.data()[c]);
        gemm_nn<T>(cout, col_cols, col_rows, w.data(), col_rows, col.data(), col_cols, ydata, col_cols);

        if (!y.needs_grad()) return y;
        const bool want_x = wants_grad(x);
        const bool want_w = wants_grad(w);
        const bool want_b = wants_grad(b);
        track_inputs({x, w, b});
        record([this, x, w, b, y, spec, cin, h, wd, cout, k, ho, wo, col_rows, col_cols, want_x, want_w,
                want_b]() mutable {
            const T* dy = y.grad_data();
            if (want_b) {
                T* db = b.grad_data();
                for (int c = 0; c < cout; ++c) {
                    T acc = 0;
                    const T* row = dy + std::size_t(c) * col_cols;
                    for (std::size_t i = 0; i < col_cols; ++i) acc += row[i];
                    db[c] += acc;
                }
            }
            if (want_w) {
                std::vector<T>& col = scratch_a_;
                col.assign(col_rows * col_cols, T(0));
                im2col(x.data(), cin, h, wd, k, spec.stride, spec.padding, ho, wo, col.data());
                gemm_nt<T>(cout, col_rows, col_cols, dy, col_cols, col.data(), col_cols, w.grad_data(),
                           col_rows);
            }
            if (want_x) {
                std::vector<T>& dcol = scratch_b_;
                dcol.assign(col_rows * col_cols, T(0));
                gemm_tn<T>(col_rows, col_cols, cout, w.data(), col_rows, dy, col_cols, dcol.data(),
                           col_cols);
                col2im_add(dcol.data(), cin, h, wd, k, spec.stride, spec.padding, ho, wo, x.grad_data());
            }
        });
        return y;
    }

    Tensor<T> relu(Tensor<T> x) {
        Tensor<T> y = make_node(x.shape(), wants_grad(x));
        const T* xd = x.data();
        T* yd = y.data();
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = xd[i] > T(0) ? xd[i] : T(0);
        if (y.needs_grad()) {
            track_inputs({x});
            record([x, y]() mutable {
                const T* dy = y.grad_data();
                const T* xd = x.data();
                T* dx = x.grad_data();
                for (std::size_t i = 0; i < x.size(); ++i)
                    if (xd[i] > T(0)) dx[i] += dy[i];
            });
        }
        return y;
    }

    Tensor<T> global_avg_pool(Tensor<T> x) {
        if (x.shape().size() != 3) throw std::invalid_argument("pool: input must be C x H x W");
        const std::size_t c = x.shape()[0];
        const std::size_t plane = x.shape()[1] * x.shape()[2];
        Tensor<T> y = make_node({c}, wants_grad(x));
        for (std::size_t i = 0; i < c; ++i) {
            T acc = 0;
            const T* row = x.data() + i * plane;
            for (std::size_t j = 0; j < plane; ++j) acc += row[j];
            y.data()[i] = acc / static_cast<T>(plane);
        }
        if (y.needs_grad()) {
            track_inputs({x});
            record([x, y, c, plane]() mutable {
                const T* dy = y.grad_data();
                T* dx = x.grad_data();
                for (std::size_t i = 0; i < c; ++i) {
                    const T g = dy[i] / static_cast<T>(plane);
                    T* row = dx + i * plane;
                    for (std::size_t j = 0; j < plane; ++j) row[j] += g;
                }
            });
        }
        return y;
    }

    Tensor<T> linear(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
        if (x.shape().size() != 1) throw std::invalid_argument("linear: input must be a vector");
        const std::size_t in = x.size();
        if (w.shape().size() != 2 || w.shape()[1] != in || b.shape() != std::vector<std::size_t>{w.shape()[0]})
            throw std::invalid_argument("linear: weight/bias shape mismatch");
        const std::size_t out = w.shape()[0];

        Tensor<T> y = make_node({out}, wants_grad(x) || wants_grad(w) || wants_grad(b));
        for (std::size_t o = 0; o < out; ++o) {
            const T* row = w.data() + o * in;
            T acc = b.data()[o];
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x.data()[i];
            y.data()[o] = acc;
        }
        if (!y.needs_grad()) return y;
        const bool want_x = wants_grad(x);
        const bool want_w = wants_grad(w);
        const bool want_b = wants_grad(b);
        track_inputs({x, w, b});
        record([x, w, b, y, in, out, want_x, want_w, want_b]() mutable {
            const T* dy = y.grad_data();
            if (want_b) {
                T* db = b.grad_data();
                for (std::size_t o = 0; o < out; ++o) db[o] += dy[o];
            }
            if (want_w) {
                T* dw = w.grad_data();
                for (std::size_t o = 0; o < out; ++o) {
                    const T g = dy[o];
                    T* row = dw + o * in;
                    for (std::size_t i = 0; i < in; ++i) row[i] += g * x.data()[i];
                }
            }
            if (want_x) {
                T* dx = x.grad_data();
                for (std::size_t o = 0; o < out; ++o) {
                    const T g = dy[o];
                    const T* row = w.data() + o * in;
                    for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
                }
            }
        });
        return y;
    }

    Tensor<T> softmax(Tensor<T> x) {
        Tensor<T> y = make_node(x.shape(), wants_grad(x));
        softmax_values(x.data(), y.data(), x.size());
        if (y.needs_grad()) {
            track_inputs({x});
            record([x, y]() mutable {
                const T* dy = y.grad_data();
                const T* yd = y.data();
                T* dx = x.grad_data();
                T dot = 0;
                for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * yd[i];
                for (std::size_t i = 0; i < y.size(); ++i) dx[i] += yd[i] * (dy[i] - dot);
            });
        }
        return y;
    }

    Tensor<T> log_softmax(Tensor<T> x) {
        Tensor<T> y = make_node(x.shape(), wants_grad(x));
        log_softmax_values(x.data(), y.data(), x.size());
        if (y.needs_grad()) {
            track_inputs({x});
            record([x, y]() mutable {
                const T* dy = y.grad_data();
                const T* yd = y.data();
                T* dx = x.grad_data();
                T sum = 0;
                for (std::size_t i = 0; i < y.size(); ++i) sum += dy[i];
                for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] - std::exp(yd[i]) * sum;
            });
        }
        return y;
    }

    // -log(p[target]) on an explicit probability vector.
    Tensor<T> cross_entropy(Tensor<T> probs, std::size_t target) {
        if (target >= probs.size()) throw std::invalid_argument("cross_entropy: target out of range");
        Tensor<T> y = make_node({1}, wants_grad(probs));
        const T p = std::max(probs.data()[target], std::numeric_limits<T>::min());
        y.data()[0] = -std::log(p);
        if (y.needs_grad()) {
            track_inputs({probs});
            record([probs, y, target, p]() mutable {
                probs.grad_data()[target] += -y.grad_data()[0] / p;
            });
        }
        return y;
    }

    // Fused log-softmax + negative log likelihood on logits; the
    // numerically stable route used for training.
    Tensor<T> softmax_cross_entropy(Tensor<T> logits, std::size_t target) {
        if (target >= logits.size()) throw std::invalid_argument("cross_entropy: target out of range");
        Tensor<T> y = make_node({1}, wants_grad(logits));
        std::vector<T> lsm(logits.size());
        log_softmax_values(logits.data(), lsm.data(), logits.size());
        y.data()[0] = -lsm[target];
        if (y.needs_grad()) {
            track_inputs({logits});
            record([logits, y, target, lsm = std::move(lsm)]() mutable {
                const T g = y.grad_data()[0];
                T* dx = logits.grad_data();
                for (std::size_t i = 0; i < logits.size(); ++i) {
                    const T p = std::exp(lsm[i]);
                    dx[i] += g * (p - (i == target ? T(1) : T(0)));
                }
            });
        }
        return y;
    }

    // Contrastive pair loss (1-s) d^2 + s max(1-d, 0)^2 on two feature
    // vectors, d = ||h1 - h2||_2.
    Tensor<T> contrastive_loss(Tensor<T> h1, Tensor<T> h2, int similarity) {
        if (h1.size() != h2.size()) throw std::invalid_argument("contrastive: feature size mismatch");
        if (similarity != 0 && similarity != 1) throw std::invalid_argument("contrastive: label must be 0 or 1");
        Tensor<T> y = make_node({1}, wants_grad(h1) || wants_grad(h2));
        T d2 = 0;
        for (std::size_t i = 0; i < h1.size(); ++i) {
            const T diff = h1.data()[i] - h2.data()[i];
            d2 += diff * diff;
        }
        const T d = std::sqrt(d2);
        const T margin_gap = std::max(T(1) - d, T(0));
        y.data()[0] = similarity == 0 ? d2 : margin_gap * margin_gap;

        if (!y.needs_grad()) return y;
        const bool want1 = wants_grad(h1);
        const bool want2 = wants_grad(h2);
        track_inputs({h1, h2});
        record([h1, h2, y, similarity, d, margin_gap, want1, want2]() mutable {
            const T g = y.grad_data()[0];
            // dL/d(h1-h2) factor applied componentwise
            T scale;
            if (similarity == 0) {
                scale = T(2) * g;
            } else if (d > T(0) && margin_gap > T(0)) {
                scale = -T(2) * g * margin_gap / d;
            } else {
                scale = T(0);  // hinge inactive, or coincident points (subgradient 0)
            }
            if (scale == T(0)) return;
            for (std::size_t i = 0; i < h1.size(); ++i) {
                const T diff = h1.data()[i] - h2.data()[i];
                if (want1) h1.grad_data()[i] += scale * diff;
                if (want2) h2.grad_data()[i] -= scale * diff;
            }
        });
        return y;
    }

    Tensor<T> add(Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
        Tensor<T> y = make_node(a.shape(), wants_grad(a) || wants_grad(b));
        for (std::size_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
        if (y.needs_grad()) {
            const bool wa = wants_grad(a), wb = wants_grad(b);
            track_inputs({a, b});
            record([a, b, y, wa, wb]() mutable {
                const T* dy = y.grad_data();
                if (wa) {
                    T* da = a.grad_data();
                    for (std::size_t i = 0; i < a.size(); ++i) da[i] += dy[i];
                }
                if (wb) {
                    T* db = b.grad_data();
                    for (std::size_t i = 0; i < b.size(); ++i) db[i] += dy[i];
                }
            });
        }
        return y;
    }

    Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape()) throw std::invalid_argument("mul: shape mismatch");
        Tensor<T> y = make_node(a.shape(), wants_grad(a) || wants_grad(b));
        for (std::size_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] * b.data()[i];
        if (y.needs_grad()) {
            const bool wa = wants_grad(a), wb = wants_grad(b);
            track_inputs({a, b});
            record([a, b, y, wa, wb]() mutable {
                const T* dy = y.grad_data();
                if (wa) {
                    T* da = a.grad_data();
                    for (std::size_t i = 0; i < a.size(); ++i) da[i] += dy[i] * b.data()[i];
                }
                if (wb) {
                    T* db = b.grad_data();
                    for (std::size_t i = 0; i < b.size(); ++i) db[i] += dy[i] * a.data()[i];
                }
            });
        }
        return y;
    }

    Tensor<T> scale(Tensor<T> x, T factor) {
        Tensor<T> y = make_node(x.shape(), wants_grad(x));
        for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = factor * x.data()[i];
        if (y.needs_grad()) {
            track_inputs({x});
            record([x, y, factor]() mutable {
                const T* dy = y.grad_data();
                T* dx = x.grad_data();
                for (std::size_t i = 0; i < x.size(); ++i) dx[i] += factor * dy[i];
            });
        }
        return y;
    }

    Tensor<T> sum(Tensor<T> x) {
        Tensor<T> y = make_node({1}, wants_grad(x));
        T acc = 0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
        y.data()[0] = acc;
        if (y.needs_grad()) {
            track_inputs({x});
            record([x, y]() mutable {
                const T g = y.grad_data()[0];
                T* dx = x.grad_data();
                for (std::size_t i = 0; i < x.size(); ++i) dx[i] += g;
            });
        }
        return y;
    }

    // --- reverse pass -----------------------------------------------------

    // Single-shot training backward: accumulates into every tracked
    // gradient (parameter gradients sum across calls until explicitly
    // zeroed). A second call without a fresh forward is an error.
    void backward(Tensor<T> loss) {
        if (loss.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
        if (tape_.empty()) throw std::logic_error("backward: no forward pass recorded");
        if (consumed_) throw std::logic_error("backward: tape already consumed; run a new forward pass");
        consumed_ = true;
        loss.grad_data()[0] += T(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    // Repeatable per-component backward for jacobian rows (attack
    // code). Clears every gradient this tape touches, then seeds
    // d(output[index]) = 1 and re-walks the intact tape.
    void backward_component(Tensor<T> output, std::size_t index) {
        if (tape_.empty()) throw std::logic_error("backward_component: no forward pass recorded");
        if (index >= output.size()) throw std::invalid_argument("backward_component: index out of range");
        for (auto& s : touched_) {
            if (!s->grad.empty()) std::fill(s->grad.begin(), s->grad.end(), T(0));
        }
        output.grad_data()[index] = T(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    bool consumed() const { return consumed_; }
    std::size_t recorded_steps() const { return tape_.size(); }

private:
    bool wants_grad(const Tensor<T>& t) const {
        if (!t.needs_grad()) return false;
        if (t.is_parameter() && !param_grads_) return false;
        return true;
    }

    Tensor<T> make_node(std::vector<std::size_t> shape, bool needs_grad) {
        Tensor<T> t = Tensor<T>::zeros(std::move(shape));
        t.set_needs_grad(needs_grad);
        if (needs_grad) {
            t.ensure_grad();
            track(t);
        }
        return t;
    }

    void track(const Tensor<T>& t) { touched_.push_back(t.shared_storage()); }

    // registers every input whose gradient this op will write, so
    // backward_component can rezero them
    void track_inputs(std::initializer_list<Tensor<T>> inputs) {
        for (const Tensor<T>& t : inputs)
            if (wants_grad(t)) {
                const_cast<Tensor<T>&>(t).ensure_grad();
                touched_.push_back(t.shared_storage());
            }
    }

    void record(std::function<void()> back) { tape_.push_back(std::move(back)); }

    static void softmax_values(const T* x, T* y, std::size_t n) {
        T m = x[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
        T sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = std::exp(x[i] - m);
            sum += y[i];
        }
        for (std::size_t i = 0; i < n; ++i) y[i] /= sum;
    }

    static void log_softmax_values(const T* x, T* y, std::size_t n) {
        T m = x[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
        T sum = 0;
        for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - m);
        const T log_sum = std::log(sum);
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - m - log_sum;
    }

    static void im2col(const T* x, int cin, int h, int w, int k, int stride, int pad, int ho, int wo,
                       T* col) {
        const std::size_t cols = std::size_t(ho) * wo;
        for (int c = 0; c < cin; ++c) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T* row = col + ((std::size_t(c) * k + ky) * k + kx) * cols;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        T* dst = row + std::size_t(oy) * wo;
                        if (iy < 0 || iy >= h) continue;  // row stays zero
                        const T* src = x + (std::size_t(c) * h + iy) * w;
                        if (stride == 1) {
                            const int x0 = std::max(0, pad - kx);
                            const int x1 = std::min(wo, w + pad - kx);
                            for (int ox = x0; ox < x1; ++ox) dst[ox] = src[ox + kx - pad];
                        } else {
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix >= 0 && ix < w) dst[ox] = src[ix];
                            }
                        }
                    }
                }
            }
        }
    }

    static void col2im_add(const T* col, int cin, int h, int w, int k, int stride, int pad, int ho,
                           int wo, T* dx) {
        const std::size_t cols = std::size_t(ho) * wo;
        for (int c = 0; c < cin; ++c) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T* row = col + ((std::size_t(c) * k + ky) * k + kx) * cols;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const T* src = row + std::size_t(oy) * wo;
                        T* dst = dx + (std::size_t(c) * h + iy) * w;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            if (ix >= 0 && ix < w) dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }

    std::vector<std::function<void()>> tape_;
    std::vector<std::shared_ptr<TensorStorage<T>>> touched_;
    bool consumed_ = false;
    bool param_grads_ = true;
    std::vector<T> scratch_a_;
    std::vector<T> scratch_b_;
};

}  // namespace sarlab::nn
