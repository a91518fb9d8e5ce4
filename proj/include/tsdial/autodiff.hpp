#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense double matrices.
// A Tape records every operation of one forward pass; backward() walks it in
// reverse and accumulates gradients into the trainable parameters it touched.
namespace tsdial::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
    bool requires_grad() const;

    Tape* tape() const { return tape_; }
    int index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, int index) : tape_(tape), index_(index) {}

    Tape* tape_ = nullptr;
    int index_ = -1;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    template <typename Derived>
    Var constant(const Eigen::MatrixBase<Derived>& value) {
        return constant(Matrix(value));
    }
    /// Constant node that views external storage (must outlive the tape).
    Var constant_view(const Matrix& value);
    /// Trainable leaf bound to `param`; memoized so each parameter has one node.
    Var parameter(Parameter& param);
    /// Frozen leaf bound to `param`; no gradient flows into it.
    Var frozen(const Parameter& param);

    /// Seeds d(loss)/d(loss) = 1 and propagates; adds leaf gradients into
    /// Parameter::grad. `loss` must be 1x1.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // Used by operation implementations.
    /// Receives the tape, the node's own index and its accumulated gradient.
    using Backward = std::function<void(Tape&, int self, const Matrix& grad_out)>;
    Var push(Matrix value, bool requires_grad, Backward backward);
    const Matrix& value_of(int index) const;
    bool requires_grad_of(int index) const { return nodes_[index].requires_grad; }
    /// grad[index] += delta (lazily allocated).
    template <typename Derived>
    void accumulate(int index, const Eigen::MatrixBase<Derived>& delta) {
        Node& node = nodes_[index];
        if (!node.requires_grad) return;
        if (node.grad.size() == 0) {
            node.grad = delta;
        } else {
            node.grad += delta;
        }
    }
    Matrix& grad_of(int index);

private:
    struct Node {
        Matrix value;
        const Matrix* view = nullptr;
        Matrix grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        Backward backward;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> bound_;
};

// ---- operations ----------------------------------------------------------

Var matmul(Var a, Var b);            // a * b
Var matmul_tn(Var a, Var b);         // a^T * b
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
/// Column-wise numerically stable log-softmax of a column vector.
Var log_softmax(Var a);
Var softmax(Var a);
/// Vertical concatenation (all parts share the column count).
Var concat_rows(std::span<const Var> parts);
/// Horizontal concatenation (all parts share the row count).
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
/// Row `row` of `a`, returned as a column vector (embedding lookup).
Var row(Var a, Eigen::Index row);
/// 1x1 node holding a(i, 0).
Var pick(Var a, Eigen::Index i);
/// 1x1 node holding sum_j weights[j] * a(ids[j], 0).
Var weighted_pick(Var a, std::span<const int> ids, std::span<const double> weights);
/// 1x1 node holding sum_i weights(i) * a(i, 0).
Var weighted_sum(Var a, const Vector& weights);
/// 1x1 node holding sum_i (a(i) - target(i))^2.
Var squared_distance(Var a, const Vector& target);
/// Sum of 1x1 nodes (or same-shaped nodes).
Var sum(std::span<const Var> parts);

}  // namespace tsdial::ad
