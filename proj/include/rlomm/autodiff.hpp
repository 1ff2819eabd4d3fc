#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rlomm::ad {

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotScalar : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DetachedLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A named learnable array. Values persist across tapes; gradients are
/// accumulated here by Tape::backward and consumed by adam_step.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;

    Param() = default;
    Param(std::string n, std::vector<int> s);

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Fixed (non-differentiable) sparse matrix in CSR form, used for graph
/// neighbor aggregation.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;  // size rows+1
    std::vector<int> col_idx;
    std::vector<double> vals;
};

class Tape;

/// Handle to a node on a tape. Shapes are 1-D {n} or 2-D {r,c}; a 1-D
/// tensor behaves as a single row where a matrix is expected.
class Tensor {
public:
    Tensor() = default;
    bool defined() const { return tape_ != nullptr; }
    const std::vector<int>& shape() const;
    std::span<const double> value() const;
    std::span<const double> grad() const;
    int rows() const;
    int cols() const;
    std::size_t numel() const;
    double scalar() const;

private:
    friend class Tape;
    friend struct OpKit;
    Tensor(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Records the forward computation; backward() replays it in reverse.
/// Single-owner, one backward pass per tape.
class Tape {
public:
    Tensor input(std::vector<int> shape, std::vector<double> data,
                 bool requires_grad = false);
    Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    /// Leaf bound to a parameter: value copied in, gradient flushed back
    /// into p.grad on backward.
    Tensor leaf(Param& p);

    void backward(const Tensor& loss);

    /// Checkpoint/rollback of the node list: reset_to(mark()) drops every
    /// node recorded in between. Tensors created after the mark dangle and
    /// must not be used once reset. Supports constant-cost streaming
    /// inference on top of long-lived graph representations.
    std::size_t mark() const { return nodes_.size(); }
    void reset_to(std::size_t m) { nodes_.resize(m); }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::vector<int> shape;
        std::vector<double> val;
        std::vector<double> grad;
        bool rg = false;
        Param* param = nullptr;
        std::function<void(Tape&, int)> back;
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;

    friend class Tensor;
    friend struct OpKit;
};

// --- primitive set -----------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// Elementwise with broadcast: same shape, [r,c] op [c], or either scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);  // subgradient 0 at the kink
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor add_const(const Tensor& a, double c);
Tensor mul_const(const Tensor& a, double c);
Tensor sum_all(const Tensor& a);    // -> {1}
Tensor mean_all(const Tensor& a);   // -> {1}
Tensor mean_axis0(const Tensor& a); // {r,c} -> {c}
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Row gather; index -1 yields a zero row and receives no gradient.
Tensor gather_rows(const Tensor& a, std::vector<int> idx);
/// One column per row: {r,c} with per-row column index -> {r}.
Tensor pick(const Tensor& a, std::vector<int> col_of_row);
Tensor spmm(const SparseMatrix& s, const Tensor& x);
/// Elementwise Huber of a difference: 0.5 x^2 for |x|<1 else |x|-0.5.
Tensor huber_unit(const Tensor& x);

/// Batch normalization over rows of {r,c} (per-feature statistics), with
/// learnable affine and running statistics (momentum 0.1). Train mode uses
/// batch statistics and updates run_mean/run_var; eval mode uses the
/// running statistics.
struct BatchNormState {
    Param gamma;
    Param beta;
    std::vector<double> run_mean;
    std::vector<double> run_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNormState() = default;
    BatchNormState(const std::string& name, int width);
};
Tensor batch_norm(Tensor x, BatchNormState& bn, bool train);

// --- optimizer ----------------------------------------------------------
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::unordered_map<const Param*, std::pair<std::vector<double>, std::vector<double>>>
        moments;
};
/// Standard bias-corrected Adam, applied in place from each param's grad.
void adam_step(std::span<Param* const> params, AdamState& state, double lr);

// --- checkpoints ----------------------------------------------------------
/// Flat binary of named arrays with a JSON header, version-tagged.
void save_checkpoint(const std::string& path, std::span<Param* const> params);
void load_checkpoint(const std::string& path, std::span<Param* const> params);

// --- gradient checking ------------------------------------------------------
/// Compares backward() gradients of the scalar loss built by build_loss
/// against central finite differences over every element of params.
/// Returns the max relative error.
double finite_diff_check(std::span<Param* const> params,
                         const std::function<Tensor(Tape&)>& build_loss,
                         double step = 1e-4);

}  // namespace rlomm::ad
