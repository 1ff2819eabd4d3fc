#include "rlomm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace rlomm::ad {

namespace {
std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= std::size_t(d);
    return n;
}
}  // namespace

Param::Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    value.assign(numel_of(shape), 0.0);
    grad.assign(numel_of(shape), 0.0);
}

// --- Tensor accessors -------------------------------------------------------

const std::vector<int>& Tensor::shape() const { return tape_->nodes_[id_].shape; }
std::span<const double> Tensor::value() const { return tape_->nodes_[id_].val; }
std::span<const double> Tensor::grad() const { return tape_->nodes_[id_].grad; }
int Tensor::rows() const {
    const auto& s = shape();
    return s.size() == 2 ? s[0] : 1;
}
int Tensor::cols() const {
    const auto& s = shape();
    return s.back();
}
std::size_t Tensor::numel() const { return tape_->nodes_[id_].val.size(); }
double Tensor::scalar() const {
    if (numel() != 1) throw NotScalar("tensor is not a scalar");
    return value()[0];
}

// --- Tape -------------------------------------------------------------------

Tensor Tape::input(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (numel_of(shape) != data.size()) throw ShapeMismatch("input data/shape mismatch");
    Node n;
    n.shape = std::move(shape);
    n.val = std::move(data);
    n.rg = requires_grad;
    if (requires_grad) n.grad.assign(n.val.size(), 0.0);
    nodes_.push_back(std::move(n));
    return Tensor(this, int(nodes_.size()) - 1);
}

Tensor Tape::zeros(std::vector<int> shape, bool requires_grad) {
    std::vector<double> data(numel_of(shape), 0.0);
    return input(std::move(shape), std::move(data), requires_grad);
}

Tensor Tape::leaf(Param& p) {
    Tensor t = input(p.shape, p.value, true);
    nodes_[t.id_].param = &p;
    return t;
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape_ != this) throw DetachedLoss("loss is not on this tape");
    if (consumed_) throw DetachedLoss("tape already consumed by backward");
    if (loss.numel() != 1) throw NotScalar("loss must be scalar");
    if (!nodes_[loss.id_].rg)
        throw DetachedLoss("loss does not depend on any differentiable input");
    consumed_ = true;
    nodes_[loss.id_].grad[0] = 1.0;
    for (int i = loss.id_; i >= 0; --i) {
        auto& n = nodes_[i];
        if (n.rg && n.back) n.back(*this, i);
        if (n.param) {
            for (std::size_t j = 0; j < n.grad.size(); ++j) n.param->grad[j] += n.grad[j];
        }
    }
}

// --- op helpers -------------------------------------------------------------

struct OpKit {
    static Tape* tape(const Tensor& t) { return t.tape_; }
    static int id(const Tensor& t) { return t.id_; }
    static Tape::Node& node(Tape& t, int id) { return t.nodes_[id]; }
    static const Tape::Node& node(const Tensor& t) { return t.tape_->nodes_[t.id_]; }

    static Tensor make(Tape& t, std::vector<int> shape, std::vector<double> val, bool rg,
                       std::function<void(Tape&, int)> back) {
        Tape::Node n;
        n.shape = std::move(shape);
        n.val = std::move(val);
        n.rg = rg;
        if (rg) {
            n.grad.assign(n.val.size(), 0.0);
            n.back = std::move(back);
        }
        t.nodes_.push_back(std::move(n));
        return Tensor(&t, int(t.nodes_.size()) - 1);
    }

    static void same_tape(const Tensor& a, const Tensor& b) {
        if (a.tape_ != b.tape_) throw ShapeMismatch("operands live on different tapes");
    }
};

namespace {

using K = OpKit;

// Broadcast classes for elementwise binaries.
enum class Bcast { Same, BScalar, AScalar, BRow, ARow };

Bcast classify(const Tensor& a, const Tensor& b) {
    if (a.numel() == b.numel() && a.rows() == b.rows()) return Bcast::Same;
    if (b.numel() == 1) return Bcast::BScalar;
    if (a.numel() == 1) return Bcast::AScalar;
    if (a.shape().size() == 2 && b.numel() == std::size_t(a.cols())) return Bcast::BRow;
    if (b.shape().size() == 2 && a.numel() == std::size_t(b.cols())) return Bcast::ARow;
    throw ShapeMismatch("incompatible elementwise shapes");
}

Tensor elementwise(const Tensor& a, const Tensor& b,
                   const std::function<double(double, double)>& f,
                   const std::function<double(double, double)>& dfa,
                   const std::function<double(double, double)>& dfb) {
    K::same_tape(a, b);
    Tape& t = *K::tape(a);
    const Bcast bc = classify(a, b);
    const Tensor& big = (bc == Bcast::AScalar || bc == Bcast::ARow) ? b : a;
    const auto av = a.value();
    const auto bv = b.value();
    const int cols = big.cols();
    auto bidx = [&](std::size_t i) -> std::size_t {
        switch (bc) {
            case Bcast::Same: return i;
            case Bcast::BScalar: return 0;
            case Bcast::BRow: return i % cols;
            default: return i;
        }
    };
    auto aidx = [&](std::size_t i) -> std::size_t {
        switch (bc) {
            case Bcast::AScalar: return 0;
            case Bcast::ARow: return i % cols;
            default: return i;
        }
    };
    std::vector<double> out(big.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[aidx(i)], bv[bidx(i)]);

    const bool rg = K::node(a).rg || K::node(b).rg;
    const int ai = K::id(a), bi = K::id(b);
    auto back = [ai, bi, bc, cols, dfa, dfb](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        auto& bn = K::node(t, bi);
        for (std::size_t i = 0; i < sn.grad.size(); ++i) {
            const double g = sn.grad[i];
            std::size_t ia = i, ib = i;
            if (bc == Bcast::BScalar) ib = 0;
            if (bc == Bcast::BRow) ib = i % cols;
            if (bc == Bcast::AScalar) ia = 0;
            if (bc == Bcast::ARow) ia = i % cols;
            if (an.rg) an.grad[ia] += g * dfa(an.val[ia], bn.val[ib]);
            if (bn.rg) bn.grad[ib] += g * dfb(an.val[ia], bn.val[ib]);
        }
    };
    return K::make(t, big.shape(), std::move(out), rg, back);
}

Tensor unary(const Tensor& a, const std::function<double(double)>& f,
             const std::function<double(double, double)>& df /* (x, y) -> dy/dx */) {
    Tape& t = *K::tape(a);
    const auto av = a.value();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
    const int ai = K::id(a);
    auto back = [ai, df](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        if (!an.rg) return;
        for (std::size_t i = 0; i < sn.grad.size(); ++i)
            an.grad[i] += sn.grad[i] * df(an.val[i], sn.val[i]);
    };
    return K::make(t, a.shape(), std::move(out), K::node(a).rg, back);
}

}  // namespace

// --- primitives ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    K::same_tape(a, b);
    const int r = a.rows(), k = a.cols(), k2 = b.rows(), c = b.cols();
    if (k != k2) throw ShapeMismatch("matmul inner dimensions differ");
    std::vector<double> out(std::size_t(r) * c, 0.0);
    const auto av = a.value();
    const auto bv = b.value();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < k; ++j) {
            const double x = av[std::size_t(i) * k + j];
            if (x == 0.0) continue;
            for (int l = 0; l < c; ++l) out[std::size_t(i) * c + l] += x * bv[std::size_t(j) * c + l];
        }
    const int ai = K::id(a), bi = K::id(b);
    auto back = [ai, bi, r, k, c](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        auto& bn = K::node(t, bi);
        if (an.rg) {
            // dA = dY * B^T
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < k; ++j) {
                    double acc = 0.0;
                    for (int l = 0; l < c; ++l)
                        acc += sn.grad[std::size_t(i) * c + l] * bn.val[std::size_t(j) * c + l];
                    an.grad[std::size_t(i) * k + j] += acc;
                }
        }
        if (bn.rg) {
            // dB = A^T * dY
            for (int j = 0; j < k; ++j)
                for (int l = 0; l < c; ++l) {
                    double acc = 0.0;
                    for (int i = 0; i < r; ++i)
                        acc += an.val[std::size_t(i) * k + j] * sn.grad[std::size_t(i) * c + l];
                    bn.grad[std::size_t(j) * c + l] += acc;
                }
        }
    };
    return K::make(*K::tape(a), {r, c}, std::move(out), K::node(a).rg || K::node(b).rg, back);
}

Tensor transpose(const Tensor& a) {
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(std::size_t(r) * c);
    const auto av = a.value();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[std::size_t(j) * r + i] = av[std::size_t(i) * c + j];
    const int ai = K::id(a);
    auto back = [ai, r, c](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        if (!an.rg) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                an.grad[std::size_t(i) * c + j] += sn.grad[std::size_t(j) * r + i];
    };
    return K::make(*K::tape(a), {c, r}, std::move(out), K::node(a).rg, back);
}

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise(
        a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise(
        a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise(
        a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}
Tensor div(const Tensor& a, const Tensor& b) {
    return elementwise(
        a, b, [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
    return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}
Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}
Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}
Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); },
                 [](double, double y) { return y; });
}
Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}
Tensor sqrt(const Tensor& a) {
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return 0.5 / y; });
}
Tensor add_const(const Tensor& a, double c) {
    return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}
Tensor mul_const(const Tensor& a, double c) {
    return unary(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}
Tensor huber_unit(const Tensor& x) {
    return unary(x,
                 [](double v) { return std::abs(v) < 1.0 ? 0.5 * v * v : std::abs(v) - 0.5; },
                 [](double v, double) { return std::clamp(v, -1.0, 1.0); });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.value()) s += v;
    const int ai = K::id(a);
    auto back = [ai](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        if (!an.rg) return;
        for (auto& g : an.grad) g += sn.grad[0];
    };
    return K::make(*K::tape(a), {1}, {s}, K::node(a).rg, back);
}

Tensor mean_all(const Tensor& a) {
    return mul_const(sum_all(a), 1.0 / double(a.numel()));
}

Tensor mean_axis0(const Tensor& a) {
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(c, 0.0);
    const auto av = a.value();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[j] += av[std::size_t(i) * c + j];
    for (auto& v : out) v /= double(r);
    const int ai = K::id(a);
    auto back = [ai, r, c](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        if (!an.rg) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) an.grad[std::size_t(i) * c + j] += sn.grad[j] / double(r);
    };
    return K::make(*K::tape(a), {c}, std::move(out), K::node(a).rg, back);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    K::same_tape(a, b);
    const int r = a.rows(), ca = a.cols(), cb = b.cols();
    if (b.rows() != r) throw ShapeMismatch("concat_cols row mismatch");
    std::vector<double> out(std::size_t(r) * (ca + cb));
    const auto av = a.value();
    const auto bv = b.value();
    for (int i = 0; i < r; ++i) {
        std::copy_n(&av[std::size_t(i) * ca], ca, &out[std::size_t(i) * (ca + cb)]);
        std::copy_n(&bv[std::size_t(i) * cb], cb, &out[std::size_t(i) * (ca + cb) + ca]);
    }
    const int ai = K::id(a), bi = K::id(b);
    auto back = [ai, bi, r, ca, cb](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        auto& bn = K::node(t, bi);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < ca + cb; ++j) {
                const double g = sn.grad[std::size_t(i) * (ca + cb) + j];
                if (j < ca) {
                    if (an.rg) an.grad[std::size_t(i) * ca + j] += g;
                } else if (bn.rg) {
                    bn.grad[std::size_t(i) * cb + (j - ca)] += g;
                }
            }
    };
    std::vector<int> shape = {r, ca + cb};
    return K::make(*K::tape(a), std::move(shape), std::move(out),
                   K::node(a).rg || K::node(b).rg, back);
}

Tensor gather_rows(const Tensor& a, std::vector<int> idx) {
    const int c = a.cols(), r = a.rows();
    std::vector<double> out(idx.size() * std::size_t(c), 0.0);
    const auto av = a.value();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0) continue;
        if (idx[i] >= r) throw ShapeMismatch("gather_rows index out of range");
        std::copy_n(&av[std::size_t(idx[i]) * c], c, &out[i * c]);
    }
    const int ai = K::id(a);
    const int nrows = int(idx.size());
    auto back = [ai, c, idx = std::move(idx)](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        if (!an.rg) return;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0) continue;
            for (int j = 0; j < c; ++j)
                an.grad[std::size_t(idx[i]) * c + j] += sn.grad[i * c + j];
        }
    };
    return K::make(*K::tape(a), {nrows, c}, std::move(out), K::node(a).rg, std::move(back));
}

Tensor pick(const Tensor& a, std::vector<int> col_of_row) {
    const int r = a.rows(), c = a.cols();
    if (int(col_of_row.size()) != r) throw ShapeMismatch("pick needs one column per row");
    std::vector<double> out(r);
    const auto av = a.value();
    for (int i = 0; i < r; ++i) {
        if (col_of_row[i] < 0 || col_of_row[i] >= c)
            throw ShapeMismatch("pick column out of range");
        out[i] = av[std::size_t(i) * c + col_of_row[i]];
    }
    const int ai = K::id(a);
    auto back = [ai, c, cols = std::move(col_of_row)](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& an = K::node(t, ai);
        if (!an.rg) return;
        for (std::size_t i = 0; i < cols.size(); ++i)
            an.grad[i * c + cols[i]] += sn.grad[i];
    };
    return K::make(*K::tape(a), {r}, std::move(out), K::node(a).rg, std::move(back));
}

Tensor spmm(const SparseMatrix& s, const Tensor& x) {
    if (x.rows() != s.cols) throw ShapeMismatch("spmm dimension mismatch");
    const int c = x.cols();
    std::vector<double> out(std::size_t(s.rows) * c, 0.0);
    const auto xv = x.value();
    for (int i = 0; i < s.rows; ++i)
        for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
            const double w = s.vals[p];
            const int j = s.col_idx[p];
            for (int l = 0; l < c; ++l)
                out[std::size_t(i) * c + l] += w * xv[std::size_t(j) * c + l];
        }
    const int xi = K::id(x);
    // The closure keeps its own CSR copy; the caller's matrix may go away.
    auto back = [xi, c, rows = s.rows, row_ptr = s.row_ptr, col_idx = s.col_idx,
                 vals = s.vals](Tape& t, int self) {
        const auto& sn = K::node(t, self);
        auto& xn = K::node(t, xi);
        if (!xn.rg) return;
        for (int i = 0; i < rows; ++i)
            for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
                const double w = vals[p];
                const int j = col_idx[p];
                for (int l = 0; l < c; ++l)
                    xn.grad[std::size_t(j) * c + l] += w * sn.grad[std::size_t(i) * c + l];
            }
    };
    return K::make(*K::tape(x), {s.rows, c}, std::move(out), K::node(x).rg, std::move(back));
}

// --- batch norm ----------------------------------------------------------------

BatchNormState::BatchNormState(const std::string& name, int width)
    : gamma(name + ".gamma", {width}), beta(name + ".beta", {width}) {
    std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
    run_mean.assign(width, 0.0);
    run_var.assign(width, 1.0);
}

Tensor batch_norm(Tensor x, BatchNormState& bn, bool train) {
    Tape& t = *OpKit::tape(x);
    const int c = x.cols();
    if (int(bn.run_mean.size()) != c) throw ShapeMismatch("batch_norm width mismatch");
    Tensor g = t.leaf(bn.gamma);
    Tensor b = t.leaf(bn.beta);
    Tensor xhat;
    if (train) {
        Tensor mu = mean_axis0(x);
        Tensor centered = sub(x, mu);
        Tensor var = mean_axis0(mul(centered, centered));
        xhat = div(centered, sqrt(add_const(var, bn.eps)));
        const auto mv = mu.value();
        const auto vv = var.value();
        for (int j = 0; j < c; ++j) {
            bn.run_mean[j] = (1.0 - bn.momentum) * bn.run_mean[j] + bn.momentum * mv[j];
            bn.run_var[j] = (1.0 - bn.momentum) * bn.run_var[j] + bn.momentum * vv[j];
        }
    } else {
        Tensor mu = t.input({c}, bn.run_mean);
        std::vector<double> denom(bn.run_var.size());
        for (int j = 0; j < c; ++j) denom[j] = std::sqrt(bn.run_var[j] + bn.eps);
        xhat = div(sub(x, mu), t.input({c}, std::move(denom)));
    }
    return add(mul(xhat, g), b);
}

// --- Adam ------------------------------------------------------------------------

void adam_step(std::span<Param* const> params, AdamState& state, double lr) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (Param* p : params) {
        auto& [m, v] = state.moments[p];
        if (m.empty()) {
            m.assign(p->size(), 0.0);
            v.assign(p->size(), 0.0);
        }
        if (m.size() != p->size()) throw ShapeMismatch("adam state/param size mismatch");
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double g = p->grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// --- checkpoints --------------------------------------------------------------

void save_checkpoint(const std::string& path, std::span<Param* const> params) {
    nlohmann::json header;
    header["version"] = 1;
    std::size_t offset = 0;
    for (const Param* p : params) {
        header["arrays"].push_back(
            {{"name", p->name}, {"shape", p->shape}, {"offset", offset}});
        offset += p->size() * sizeof(double);
    }
    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write("RLCK", 4);
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), std::streamsize(hs.size()));
    for (const Param* p : params)
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  std::streamsize(p->size() * sizeof(double)));
}

void load_checkpoint(const std::string& path, std::span<Param* const> params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "RLCK", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    in.read(hs.data(), std::streamsize(hlen));
    const auto header = nlohmann::json::parse(hs);
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint version");
    std::unordered_map<std::string, std::pair<std::vector<int>, std::size_t>> arrays;
    for (const auto& a : header.at("arrays"))
        arrays[a.at("name").get<std::string>()] = {a.at("shape").get<std::vector<int>>(),
                                                   a.at("offset").get<std::size_t>()};
    const std::size_t base = 4 + 8 + hlen;
    for (Param* p : params) {
        auto it = arrays.find(p->name);
        if (it == arrays.end())
            throw std::runtime_error("checkpoint missing array: " + p->name);
        if (it->second.first != p->shape)
            throw ShapeMismatch("checkpoint shape mismatch for " + p->name);
        in.seekg(std::streamoff(base + it->second.second));
        in.read(reinterpret_cast<char*>(p->value.data()),
                std::streamsize(p->size() * sizeof(double)));
    }
}

// --- finite differences -------------------------------------------------------------

double finite_diff_check(std::span<Param* const> params,
                         const std::function<Tensor(Tape&)>& build_loss, double step) {
    for (Param* p : params) p->zero_grad();
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = build_loss(tape);
        tape.backward(loss);
    }
    for (Param* p : params) analytic.push_back(p->grad);

    auto eval = [&]() {
        Tape tape;
        return build_loss(tape).scalar();
    };

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + step;
            const double fp = eval();
            p.value[i] = saved - step;
            const double fm = eval();
            p.value[i] = saved;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[pi][i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
            max_rel = std::max(max_rel, std::abs(fd - an) / denom);
        }
    }
    return max_rel;
}

}  // namespace rlomm::ad
