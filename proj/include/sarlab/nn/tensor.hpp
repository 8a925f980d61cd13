#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarlab::nn {

template <typename T>
struct TensorStorage {
    std::vector<std::size_t> shape;
    std::vector<T> values;
    std::vector<T> grad;  // allocated on demand, same length as values
    bool needs_grad = false;
    bool is_parameter = false;
    std::string name;
};

// Cheap shared handle to an n-dimensional real array with an optional
// accumulated gradient.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.s_ = std::make_shared<TensorStorage<T>>();
        t.s_->shape = std::move(shape);
        t.s_->values.assign(t.count(t.s_->shape), T(0));
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::span<const T> data) {
        Tensor t = zeros(std::move(shape));
        if (data.size() != t.size()) throw std::invalid_argument("tensor: data length does not match shape");
        std::copy(data.begin(), data.end(), t.s_->values.begin());
        return t;
    }

    bool valid() const { return static_cast<bool>(s_); }
    const std::vector<std::size_t>& shape() const { return s_->shape; }
    std::size_t size() const { return s_->values.size(); }

    std::vector<T>& values() { return s_->values; }
    const std::vector<T>& values() const { return s_->values; }
    T* data() { return s_->values.data(); }
    const T* data() const { return s_->values.data(); }

    bool needs_grad() const { return s_->needs_grad; }
    void set_needs_grad(bool v) { s_->needs_grad = v; }
    bool is_parameter() const { return s_->is_parameter; }
    void mark_parameter(std::string name) {
        s_->is_parameter = true;
        s_->needs_grad = true;
        s_->name = std::move(name);
    }
    const std::string& name() const { return s_->name; }

    bool has_grad() const { return !s_->grad.empty(); }
    void ensure_grad() {
        if (s_->grad.size() != s_->values.size()) s_->grad.assign(s_->values.size(), T(0));
    }
    void zero_grad() {
        if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
    }
    std::vector<T>& grad() {
        ensure_grad();
        return s_->grad;
    }
    const std::vector<T>& grad() const { return s_->grad; }
    T* grad_data() {
        ensure_grad();
        return s_->grad.data();
    }

    TensorStorage<T>* storage() { return s_.get(); }
    std::shared_ptr<TensorStorage<T>> shared_storage() const { return s_; }

    bool same_storage(const Tensor& o) const { return s_ == o.s_; }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    std::shared_ptr<TensorStorage<T>> s_;
};

}  // namespace sarlab::nn
