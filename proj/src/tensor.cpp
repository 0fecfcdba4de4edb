#include "synli/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace synli {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

// ---- Tensor ----

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
    auto d = std::make_shared<Data>();
    d->shape = shape;
    d->values.assign(shape_numel(shape), value);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw DimensionError("shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    Tensor t = zeros(shape, requires_grad);
    t.data() = std::move(values);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    for (double& v : t.data()) v = stddev * rng.normal();
    return t;
}

Tensor Tensor::randu(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

const Shape& Tensor::shape() const { return d_->shape; }
size_t Tensor::size() const { return d_->values.size(); }
std::vector<double>& Tensor::data() { return d_->values; }
const std::vector<double>& Tensor::data() const { return d_->values; }

double Tensor::value() const {
    if (size() != 1) throw ContractError("value() on non-scalar tensor " + shape_str(shape()));
    return d_->values[0];
}

double Tensor::at(int i) const { return d_->values[static_cast<size_t>(i)]; }
double Tensor::at(int i, int j) const {
    return d_->values[static_cast<size_t>(i) * dim(1) + j];
}
double Tensor::at(int i, int j, int k) const {
    return d_->values[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
}
double& Tensor::mut(int i) { return d_->values[static_cast<size_t>(i)]; }
double& Tensor::mut(int i, int j) { return d_->values[static_cast<size_t>(i) * dim(1) + j]; }

bool Tensor::requires_grad() const { return d_->requires_grad; }
bool Tensor::has_grad() const { return !d_->grad.empty(); }

std::vector<double>& Tensor::grad() {
    if (d_->grad.empty()) d_->grad.assign(size(), 0.0);
    return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (d_->grad.empty()) throw ContractError("grad accessed before backward populated it");
    return d_->grad;
}

void Tensor::zero_grad() { d_->grad.clear(); }

Tensor Tensor::clone() const {
    Tensor t = zeros(shape(), requires_grad());
    t.data() = data();
    return t;
}

Tensor Tensor::detach() const {
    Tensor t = zeros(shape(), false);
    t.data() = data();
    return t;
}

bool Tensor::all_finite() const {
    for (double v : d_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---- Tape ----

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> rule) {
    if (g_active_tape) g_active_tape->entries_.push_back(std::move(rule));
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw ContractError("backward requires a scalar loss");
    loss.d_->grad.assign(1, 0.0);
    loss.d_->grad[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

// ---- op helpers ----

namespace {

bool track(std::initializer_list<const Tensor*> ins) {
    if (!Tape::active()) return false;
    for (const Tensor* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

// out grad may be absent when the op is off the loss path
const std::vector<double>* out_grad(const Tensor& out) {
    return out.has_grad() ? &out.grad() : nullptr;
}

void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got " + shape_str(t.shape()));
}

}  // namespace

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n}, track({&a, &b}));
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += pa[i * k + t] * pb[t * n + j];
            po[i * n + j] = acc;
        }
    if (out.requires_grad()) {
        Tensor ac = a, bc = b, oc = out;
        Tape::record([ac, bc, oc, m, n, k]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go) return;
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                const auto& vb = bc.data();
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += (*go)[i * n + j] * vb[t * n + j];
                        ga[i * k + t] += acc;
                    }
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                const auto& va = ac.data();
                for (int t = 0; t < k; ++t)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += va[i * k + t] * (*go)[i * n + j];
                        gb[t * n + j] += acc;
                    }
            }
        });
    }
    return out;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
    require_rank(a, 2, "matvec");
    require_rank(x, 1, "matvec");
    int m = a.dim(0), k = a.dim(1);
    if (k != x.dim(0))
        throw DimensionError("matvec: " + shape_str(a.shape()) + " vs " + shape_str(x.shape()));
    Tensor out = Tensor::zeros({m}, track({&a, &x}));
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int t = 0; t < k; ++t) acc += a.at(i, t) * x.at(t);
        out.mut(i) = acc;
    }
    if (out.requires_grad()) {
        Tensor ac = a, xc = x, oc = out;
        Tape::record([ac, xc, oc, m, k]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go) return;
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < k; ++t) ga[i * k + t] += (*go)[i] * xc.at(t);
            }
            if (xc.requires_grad()) {
                auto& gx = xc.grad();
                for (int t = 0; t < k; ++t) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += ac.at(i, t) * (*go)[i];
                    gx[t] += acc;
                }
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    int r = a.dim(0), c = a.dim(1);
    Tensor out = Tensor::zeros({c, r}, track({&a}));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.mut(j, i) = a.at(i, j);
    if (out.requires_grad()) {
        Tensor ac = a, oc = out;
        Tape::record([ac, oc, r, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !ac.requires_grad()) return;
            auto& ga = ac.grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) ga[i * c + j] += (*go)[j * r + i];
        });
    }
    return out;
}

namespace {

Tensor elementwise2(const Tensor& a, const Tensor& b, const char* op,
                    const std::function<double(double, double)>& f,
                    // local grads w.r.t. a and b given (va, vb)
                    const std::function<double(double, double)>& da,
                    const std::function<double(double, double)>& db) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shapes differ, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape(), track({&a, &b}));
    size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = f(a.data()[i], b.data()[i]);
    if (out.requires_grad()) {
        Tensor ac = a, bc = b, oc = out;
        Tape::record([ac, bc, oc, da, db, n]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go) return;
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                for (size_t i = 0; i < n; ++i)
                    ga[i] += (*go)[i] * da(ac.data()[i], bc.data()[i]);
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                for (size_t i = 0; i < n; ++i)
                    gb[i] += (*go)[i] * db(ac.data()[i], bc.data()[i]);
            }
        });
    }
    return out;
}

Tensor elementwise1(const Tensor& a, const std::function<double(double)>& f,
                    // local grad given (input value, output value)
                    const std::function<double(double, double)>& dfn) {
    Tensor out = Tensor::zeros(a.shape(), track({&a}));
    size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.data()[i] = f(a.data()[i]);
    if (out.requires_grad()) {
        Tensor ac = a, oc = out;
        Tape::record([ac, oc, dfn, n]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !ac.requires_grad()) return;
            auto& ga = ac.grad();
            for (size_t i = 0; i < n; ++i)
                ga[i] += (*go)[i] * dfn(ac.data()[i], oc.data()[i]);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise2(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise2(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise2(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
    return elementwise1(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    require_rank(m, 2, "add_rowvec");
    require_rank(v, 1, "add_rowvec");
    int r = m.dim(0), c = m.dim(1);
    if (v.dim(0) != c)
        throw DimensionError("add_rowvec: " + shape_str(m.shape()) + " vs " + shape_str(v.shape()));
    Tensor out = Tensor::zeros({r, c}, track({&m, &v}));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.mut(i, j) = m.at(i, j) + v.at(j);
    if (out.requires_grad()) {
        Tensor mc = m, vc = v, oc = out;
        Tape::record([mc, vc, oc, r, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go) return;
            if (mc.requires_grad()) {
                auto& gm = mc.grad();
                for (size_t i = 0; i < gm.size(); ++i) gm[i] += (*go)[i];
            }
            if (vc.requires_grad()) {
                auto& gv = vc.grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gv[j] += (*go)[i * c + j];
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    int rank = parts[0].rank();
    if (axis < 0 || axis >= rank) throw DimensionError("concat: bad axis");
    Shape out_shape = parts[0].shape();
    for (size_t p = 1; p < parts.size(); ++p) {
        const Shape& s = parts[p].shape();
        if (static_cast<int>(s.size()) != rank)
            throw DimensionError("concat: rank mismatch at input " + std::to_string(p));
        for (int d = 0; d < rank; ++d) {
            if (d == axis) continue;
            if (s[d] != out_shape[d])
                throw DimensionError("concat: shape mismatch at input " + std::to_string(p) +
                                     ": " + shape_str(s) + " vs " + shape_str(parts[0].shape()));
        }
        out_shape[axis] += s[axis];
    }
    bool rg = false;
    if (Tape::active())
        for (const Tensor& t : parts) rg = rg || t.requires_grad();
    Tensor out = Tensor::zeros(out_shape, rg);

    // view every tensor as [outer, along-axis, inner]
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<size_t>(out_shape[d]);
    for (int d = axis + 1; d < rank; ++d) inner *= static_cast<size_t>(out_shape[d]);
    size_t out_axis = static_cast<size_t>(out_shape[axis]);

    size_t offset = 0;  // along axis, in units of inner
    std::vector<size_t> offsets;
    for (const Tensor& t : parts) {
        offsets.push_back(offset);
        size_t ta = static_cast<size_t>(t.shape()[axis]);
        for (size_t o = 0; o < outer; ++o)
            std::copy_n(t.data().data() + o * ta * inner, ta * inner,
                        out.data().data() + (o * out_axis + offset) * inner);
        offset += ta;
    }
    if (out.requires_grad()) {
        std::vector<Tensor> pc = parts;
        Tensor oc = out;
        Tape::record([pc, oc, offsets, outer, inner, out_axis]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go) return;
            for (size_t p = 0; p < pc.size(); ++p) {
                if (!pc[p].requires_grad()) continue;
                auto& g = pc[p].grad();
                size_t ta = pc[p].size() / (outer * inner);
                for (size_t o = 0; o < outer; ++o)
                    for (size_t a = 0; a < ta; ++a)
                        for (size_t i = 0; i < inner; ++i)
                            g[(o * ta + a) * inner + i] +=
                                (*go)[(o * out_axis + offsets[p] + a) * inner + i];
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_numel(shape) != a.size())
        throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Tensor out = Tensor::zeros(shape, track({&a}));
    out.data() = a.data();
    if (out.requires_grad()) {
        Tensor ac = a, oc = out;
        Tape::record([ac, oc]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !ac.requires_grad()) return;
            auto& ga = ac.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i];
        });
    }
    return out;
}

Tensor row(const Tensor& m, int i) {
    require_rank(m, 2, "row");
    if (i < 0 || i >= m.dim(0)) throw DimensionError("row: index out of range");
    int c = m.dim(1);
    Tensor out = Tensor::zeros({c}, track({&m}));
    std::copy_n(m.data().data() + static_cast<size_t>(i) * c, c, out.data().data());
    if (out.requires_grad()) {
        Tensor mc = m, oc = out;
        Tape::record([mc, oc, i, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !mc.requires_grad()) return;
            auto& gm = mc.grad();
            for (int j = 0; j < c; ++j) gm[static_cast<size_t>(i) * c + j] += (*go)[j];
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& m, const std::vector<int>& ids) {
    require_rank(m, 2, "gather_rows");
    int r = m.dim(0), c = m.dim(1);
    for (int id : ids)
        if (id < 0 || id >= r)
            throw ContractError("gather_rows: index " + std::to_string(id) + " out of range");
    Tensor out = Tensor::zeros({static_cast<int>(ids.size()), c}, track({&m}));
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(m.data().data() + static_cast<size_t>(ids[i]) * c, c,
                    out.data().data() + i * c);
    if (out.requires_grad()) {
        Tensor mc = m, oc = out;
        Tape::record([mc, oc, ids, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !mc.requires_grad()) return;
            auto& gm = mc.grad();
            for (size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < c; ++j)
                    gm[static_cast<size_t>(ids[i]) * c + j] += (*go)[i * c + j];
        });
    }
    return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw DimensionError("stack_rows: no inputs");
    std::vector<Tensor> reshaped;
    reshaped.reserve(rows.size());
    for (const Tensor& r : rows) {
        require_rank(r, 1, "stack_rows");
        reshaped.push_back(reshape(r, {1, r.dim(0)}));
    }
    return concat(reshaped, 0);
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_rank(a, 1, "dot");
    require_rank(b, 1, "dot");
    if (a.dim(0) != b.dim(0))
        throw DimensionError("dot: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
    Tensor out = Tensor::scalar(acc, track({&a, &b}));
    if (out.requires_grad()) {
        Tensor ac = a, bc = b, oc = out;
        Tape::record([ac, bc, oc]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go) return;
            double g = (*go)[0];
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += g * bc.data()[i];
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] += g * ac.data()[i];
            }
        });
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    Tensor out = Tensor::scalar(acc, track({&a}));
    if (out.requires_grad()) {
        Tensor ac = a, oc = out;
        Tape::record([ac, oc]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !ac.requires_grad()) return;
            auto& ga = ac.grad();
            for (double& g : ga) g += (*go)[0];
        });
    }
    return out;
}

Tensor sum_axis0(const Tensor& m) {
    require_rank(m, 2, "sum_axis0");
    int r = m.dim(0), c = m.dim(1);
    Tensor out = Tensor::zeros({c}, track({&m}));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.mut(j) += m.at(i, j);
    if (out.requires_grad()) {
        Tensor mc = m, oc = out;
        Tape::record([mc, oc, r, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !mc.requires_grad()) return;
            auto& gm = mc.grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) gm[static_cast<size_t>(i) * c + j] += (*go)[j];
        });
    }
    return out;
}

Tensor mean_axis0(const Tensor& m) {
    require_rank(m, 2, "mean_axis0");
    return scale(sum_axis0(m), 1.0 / m.dim(0));
}

Tensor max_axis0(const Tensor& m) {
    require_rank(m, 2, "max_axis0");
    int r = m.dim(0), c = m.dim(1);
    Tensor out = Tensor::zeros({c}, track({&m}));
    std::vector<int> argmax(static_cast<size_t>(c), 0);
    for (int j = 0; j < c; ++j) {
        double best = m.at(0, j);
        int bi = 0;
        for (int i = 1; i < r; ++i)
            if (m.at(i, j) > best) {
                best = m.at(i, j);
                bi = i;
            }
        out.mut(j) = best;
        argmax[static_cast<size_t>(j)] = bi;
    }
    if (out.requires_grad()) {
        Tensor mc = m, oc = out;
        Tape::record([mc, oc, argmax, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !mc.requires_grad()) return;
            auto& gm = mc.grad();
            for (int j = 0; j < c; ++j)
                gm[static_cast<size_t>(argmax[static_cast<size_t>(j)]) * c + j] += (*go)[j];
        });
    }
    return out;
}

Tensor tanh_t(const Tensor& a) {
    return elementwise1(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid_t(const Tensor& a) {
    return elementwise1(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor relu_t(const Tensor& a) {
    return elementwise1(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& x, const Tensor* mask) {
    Tensor m2 = x.rank() == 1 ? reshape(x, {1, x.dim(0)}) : x;
    require_rank(m2, 2, "softmax_rows");
    if (mask && mask->shape() != m2.shape())
        throw DimensionError("softmax_rows: mask shape " + shape_str(mask->shape()) +
                             " vs input " + shape_str(m2.shape()));
    int r = m2.dim(0), c = m2.dim(1);
    Tensor out = Tensor::zeros({r, c}, track({&m2}));
    std::vector<double> mask_vals;
    if (mask) mask_vals = mask->data();
    auto keep = [&](int i, int j) {
        return !mask || mask_vals[static_cast<size_t>(i) * c + j] != 0.0;
    };
    for (int i = 0; i < r; ++i) {
        double mx = -HUGE_VAL;
        for (int j = 0; j < c; ++j)
            if (keep(i, j)) mx = std::max(mx, m2.at(i, j));
        if (mx == -HUGE_VAL)
            throw ContractError("softmax_rows: fully masked (degenerate) row " + std::to_string(i));
        double z = 0.0;
        for (int j = 0; j < c; ++j)
            if (keep(i, j)) z += std::exp(m2.at(i, j) - mx);
        for (int j = 0; j < c; ++j)
            out.mut(i, j) = keep(i, j) ? std::exp(m2.at(i, j) - mx) / z : 0.0;
    }
    if (out.requires_grad()) {
        Tensor xc = m2, oc = out;
        Tape::record([xc, oc, r, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !xc.requires_grad()) return;
            auto& gx = xc.grad();
            for (int i = 0; i < r; ++i) {
                double s = 0.0;
                for (int j = 0; j < c; ++j) s += oc.at(i, j) * (*go)[i * c + j];
                for (int j = 0; j < c; ++j)
                    gx[static_cast<size_t>(i) * c + j] += oc.at(i, j) * ((*go)[i * c + j] - s);
            }
        });
    }
    if (x.rank() == 1) return reshape(out, {x.dim(0)});
    return out;
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          Reduction reduction) {
    require_rank(logits, 2, "cross_entropy_rows");
    int r = logits.dim(0), c = logits.dim(1);
    if (static_cast<int>(targets.size()) != r)
        throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(r) + " rows");
    for (int t : targets)
        if (t < 0 || t >= c) throw ContractError("cross_entropy_rows: target out of range");
    double total = 0.0;
    std::vector<double> probs(static_cast<size_t>(r) * c);
    for (int i = 0; i < r; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
        double lse = mx + std::log(z);
        total += lse - logits.at(i, targets[static_cast<size_t>(i)]);
        for (int j = 0; j < c; ++j)
            probs[static_cast<size_t>(i) * c + j] = std::exp(logits.at(i, j) - lse);
    }
    double norm = reduction == Reduction::Mean ? 1.0 / r : 1.0;
    Tensor out = Tensor::scalar(total * norm, track({&logits}));
    if (out.requires_grad()) {
        Tensor lc = logits, oc = out;
        Tape::record([lc, oc, probs, targets, norm, r, c]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !lc.requires_grad()) return;
            double g = (*go)[0] * norm;
            auto& gl = lc.grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) {
                    double p = probs[static_cast<size_t>(i) * c + j];
                    double onehot = (j == targets[static_cast<size_t>(i)]) ? 1.0 : 0.0;
                    gl[static_cast<size_t>(i) * c + j] += g * (p - onehot);
                }
        });
    }
    return out;
}

Tensor dropout_t(const Tensor& x, double rate, Rng& rng, bool train_mode) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must be in [0,1)");
    if (!train_mode || rate == 0.0) return x;
    double inv_keep = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.size());
    for (double& m : mask) m = rng.uniform() < rate ? 0.0 : inv_keep;
    Tensor out = Tensor::zeros(x.shape(), track({&x}));
    for (size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * mask[i];
    if (out.requires_grad()) {
        Tensor xc = x, oc = out;
        Tape::record([xc, oc, mask]() mutable {
            const std::vector<double>* go = out_grad(oc);
            if (!go || !xc.requires_grad()) return;
            auto& gx = xc.grad();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*go)[i] * mask[i];
        });
    }
    return out;
}

// ---- Adam ----

void adam_step(const std::vector<Tensor>& params, AdamState& state, double lr,
               std::pair<double, double> betas, double eps) {
    if (lr <= 0.0) throw ContractError("adam_step: lr must be positive");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t p = 0; p < params.size(); ++p) {
            state.m[p].assign(params[p].size(), 0.0);
            state.v[p].assign(params[p].size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw ContractError("adam_step: state does not match parameter list");
    state.t += 1;
    double b1 = betas.first, b2 = betas.second;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor param = params[p];
        if (!param.has_grad())
            throw ContractError("adam_step: parameter " + std::to_string(p) + " has no gradient");
        const auto& g = param.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        auto& w = param.data();
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---- gradient checking ----

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, double step, double tol) {
    if (step <= 0.0) throw ContractError("grad_check: step must be positive");
    std::vector<Tensor> xs;
    xs.reserve(inputs.size());
    for (const Tensor& in : inputs) {
        Tensor x = in.clone();
        Tensor rg = Tensor::zeros(x.shape(), true);
        rg.data() = x.data();
        xs.push_back(rg);
    }
    std::vector<std::vector<double>> tape_grads(xs.size());
    {
        Tape tape;
        Tensor out = f(xs);
        if (out.size() != 1) throw ContractError("grad_check: f must return a scalar");
        tape.backward(out);
        for (size_t i = 0; i < xs.size(); ++i)
            tape_grads[i] = xs[i].has_grad() ? xs[i].grad()
                                             : std::vector<double>(xs[i].size(), 0.0);
    }
    GradCheckReport report;
    for (size_t i = 0; i < xs.size(); ++i) {
        for (size_t j = 0; j < xs[i].size(); ++j) {
            double orig = xs[i].data()[j];
            xs[i].data()[j] = orig + step;
            double f_plus = f(xs).value();
            xs[i].data()[j] = orig - step;
            double f_minus = f(xs).value();
            xs[i].data()[j] = orig;
            double fd = (f_plus - f_minus) / (2.0 * step);
            double tg = tape_grads[i][j];
            double rel = std::fabs(tg - fd) / std::max({1.0, std::fabs(tg), std::fabs(fd)});
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_input =
                    "input " + std::to_string(i) + " element " + std::to_string(j);
            }
        }
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

}  // namespace synli
