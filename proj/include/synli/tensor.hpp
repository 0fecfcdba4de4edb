#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synli/common.hpp"

namespace synli {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

std::string shape_str(const Shape& s);

// Dense row-major double tensor. Copying a Tensor copies the handle, not the
// storage; parameters and graph nodes share identity through it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
    static Tensor randu(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad = false);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int dim(int i) const { return shape()[static_cast<size_t>(i)]; }
    size_t size() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;

    double value() const;  // scalar tensors only
    double at(int i) const;
    double at(int i, int j) const;
    double at(int i, int j, int k) const;
    double& mut(int i);
    double& mut(int i, int j);

    bool requires_grad() const;
    bool has_grad() const;
    std::vector<double>& grad();              // allocates zeros on first use
    const std::vector<double>& grad() const;  // requires has_grad()
    void zero_grad();

    // Deep copy of values (and requires_grad flag); no shared storage, no grad.
    Tensor clone() const;
    // Same values, requires_grad=false, never on any tape.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }
    bool all_finite() const;

private:
    struct Data {
        Shape shape;
        std::vector<double> values;
        std::vector<double> grad;  // empty until needed
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;

    explicit Tensor(std::shared_ptr<Data> d) : d_(std::move(d)) {}
    friend class Tape;
};

// Reverse-mode tape. Constructing a Tape makes it the active recorder for the
// current thread; destruction restores the previous one. Ops append entries in
// execution order, so a reverse sweep is a valid topological traversal.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Seeds d(loss)/d(loss)=1 and runs every recorded rule in reverse order.
    // Grads accumulate across calls until zero_grad/clear.
    void backward(const Tensor& loss);

    void clear() { entries_.clear(); }
    size_t size() const { return entries_.size(); }

    static Tape* active();
    static void record(std::function<void()> rule);

private:
    std::vector<std::function<void()>> entries_;
    Tape* prev_ = nullptr;
};

// ---- differentiable ops ----

Tensor matmul(const Tensor& a, const Tensor& b);          // [m×k]·[k×n]
Tensor matvec(const Tensor& a, const Tensor& x);          // [m×k]·[k]
Tensor transpose(const Tensor& a);                        // 2-D
Tensor add(const Tensor& a, const Tensor& b);             // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);             // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& m, const Tensor& v);      // [r×c] + [c] per row
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor row(const Tensor& m, int i);                       // [r×c] -> [c]
Tensor gather_rows(const Tensor& m, const std::vector<int>& ids);
Tensor stack_rows(const std::vector<Tensor>& rows);       // n×[c] -> [n×c]
Tensor dot(const Tensor& a, const Tensor& b);             // 1-D -> scalar
Tensor sum_all(const Tensor& a);
Tensor sum_axis0(const Tensor& m);                        // [r×c] -> [c]
Tensor mean_axis0(const Tensor& m);
Tensor max_axis0(const Tensor& m);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid_t(const Tensor& a);
Tensor relu_t(const Tensor& a);

// Row-normalized softmax with mandatory row-max subtraction. mask (0/1 values,
// same shape) zeroes masked positions exactly; a fully masked row is an error.
Tensor softmax_rows(const Tensor& x, const Tensor* mask = nullptr);

// Mean (or sum) cross-entropy of row-softmax against integer targets.
enum class Reduction { Mean, Sum };
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          Reduction reduction = Reduction::Mean);

// Inverted dropout: scales kept activations by 1/(1-rate) in train mode,
// identity in eval mode.
Tensor dropout_t(const Tensor& x, double rate, Rng& rng, bool train_mode);

// ---- optimization ----

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t t = 0;
};

void adam_step(const std::vector<Tensor>& params, AdamState& state, double lr,
               std::pair<double, double> betas = {0.9, 0.999}, double eps = 1e-8);

// ---- gradient checking ----

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
    std::string worst_input;  // "input <i> element <j>"
};

// Compares tape gradients of scalar f(inputs) against central finite
// differences over every element of every input.
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, double step, double tol);

}  // namespace synli
