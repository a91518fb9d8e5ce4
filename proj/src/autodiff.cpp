#include "tsdial/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace tsdial::ad {

const Matrix& Var::value() const { return tape_->value_of(index_); }

bool Var::requires_grad() const { return tape_->requires_grad_of(index_); }

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::constant_view(const Matrix& value) {
    Node node;
    node.view = &value;
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& param) {
    if (auto it = bound_.find(&param); it != bound_.end()) return Var(this, it->second);
    Node node;
    node.view = &param.value;
    node.requires_grad = true;
    node.param = &param;
    nodes_.push_back(std::move(node));
    const int index = static_cast<int>(nodes_.size() - 1);
    bound_.emplace(&param, index);
    return Var(this, index);
}

Var Tape::frozen(const Parameter& param) {
    if (auto it = bound_.find(&param); it != bound_.end()) return Var(this, it->second);
    Var v = constant_view(param.value);
    bound_.emplace(&param, v.index());
    return v;
}

const Matrix& Tape::value_of(int index) const {
    const Node& node = nodes_[index];
    return node.view ? *node.view : node.value;
}

Matrix& Tape::grad_of(int index) { return nodes_[index].grad; }

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("backward: loss must be 1x1");
    if (!loss.requires_grad()) return;
    accumulate(loss.index(), Matrix::Ones(1, 1));
    for (int i = loss.index(); i >= 0; --i) {
        Node& node = nodes_[i];
        if (!node.requires_grad || node.grad.size() == 0) continue;
        if (node.backward) {
            node.backward(*this, i, node.grad);
        } else if (node.param) {
            Parameter& p = *node.param;
            if (p.grad.size() == 0) p.zero_grad();
            p.grad += node.grad;
        }
        if (!node.param) node.grad.resize(0, 0);
    }
}

namespace {

Tape& tape_of(Var v) {
    if (!v.valid()) throw std::invalid_argument("operation on an unbound Var");
    return *v.tape();
}

void check_same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

void check_column(Var a, const char* op) {
    if (a.cols() != 1) throw std::invalid_argument(std::string(op) + ": expects a column vector");
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Tape& t = tape_of(a);
    const int ia = a.index(), ib = b.index();
    return t.push(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, int, const Matrix& g) {
                      if (tp.requires_grad_of(ia)) tp.accumulate(ia, g * tp.value_of(ib).transpose());
                      if (tp.requires_grad_of(ib)) tp.accumulate(ib, tp.value_of(ia).transpose() * g);
                  });
}

Var matmul_tn(Var a, Var b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: row counts differ");
    Tape& t = tape_of(a);
    const int ia = a.index(), ib = b.index();
    return t.push(a.value().transpose() * b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, int, const Matrix& g) {
                      if (tp.requires_grad_of(ia)) tp.accumulate(ia, tp.value_of(ib) * g.transpose());
                      if (tp.requires_grad_of(ib)) tp.accumulate(ib, tp.value_of(ia) * g);
                  });
}

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Tape& t = tape_of(a);
    const int ia = a.index(), ib = b.index();
    return t.push(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, int, const Matrix& g) {
                      tp.accumulate(ia, g);
                      tp.accumulate(ib, g);
                  });
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Tape& t = tape_of(a);
    const int ia = a.index(), ib = b.index();
    return t.push(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, int, const Matrix& g) {
                      tp.accumulate(ia, g);
                      tp.accumulate(ib, -g);
                  });
}

Var hadamard(Var a, Var b) {
    check_same_shape(a, b, "hadamard");
    Tape& t = tape_of(a);
    const int ia = a.index(), ib = b.index();
    return t.push(a.value().cwiseProduct(b.value()), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, int, const Matrix& g) {
                      if (tp.requires_grad_of(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value_of(ib)));
                      if (tp.requires_grad_of(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value_of(ia)));
                  });
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a);
    const int ia = a.index();
    return t.push(a.value() * factor, a.requires_grad(),
                  [ia, factor](Tape& tp, int, const Matrix& g) { tp.accumulate(ia, g * factor); });
}

Var sigmoid(Var a) {
    Tape& t = tape_of(a);
    const int ia = a.index();
    Matrix y = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return t.push(std::move(y), a.requires_grad(), [ia](Tape& tp, int self, const Matrix& g) {
        const Matrix& y = tp.value_of(self);
        tp.accumulate(ia, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
    });
}

Var tanh(Var a) {
    Tape& t = tape_of(a);
    const int ia = a.index();
    Matrix y = a.value().array().tanh().matrix();
    return t.push(std::move(y), a.requires_grad(), [ia](Tape& tp, int self, const Matrix& g) {
        const Matrix& y = tp.value_of(self);
        tp.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
    });
}

Var log_softmax(Var a) {
    check_column(a, "log_softmax");
    Tape& t = tape_of(a);
    const int ia = a.index();
    const Matrix& x = a.value();
    const double max = x.maxCoeff();
    const double log_z = max + std::log((x.array() - max).exp().sum());
    Matrix y = (x.array() - log_z).matrix();
    return t.push(std::move(y), a.requires_grad(), [ia](Tape& tp, int self, const Matrix& g) {
        const Matrix& y = tp.value_of(self);
        // d/dx_j = g_j - softmax_j * sum(g)
        tp.accumulate(ia, (g.array() - y.array().exp() * g.sum()).matrix());
    });
}

Var softmax(Var a) {
    check_column(a, "softmax");
    Tape& t = tape_of(a);
    const int ia = a.index();
    const Matrix& x = a.value();
    Eigen::ArrayXXd e = (x.array() - x.maxCoeff()).exp();
    Matrix y = (e / e.sum()).matrix();
    return t.push(std::move(y), a.requires_grad(), [ia](Tape& tp, int self, const Matrix& g) {
        const Matrix& y = tp.value_of(self);
        const double dot = y.cwiseProduct(g).sum();
        tp.accumulate(ia, (y.array() * (g.array() - dot)).matrix());
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    Tape& t = tape_of(parts.front());
    const Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    bool grad = false;
    for (const Var& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
        rows += p.rows();
        grad = grad || p.requires_grad();
    }
    Matrix y(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
        y.middleRows(offset, p.rows()) = p.value();
        ids.push_back(p.index());
        offsets.push_back(offset);
        offset += p.rows();
    }
    return t.push(std::move(y), grad,
                  [ids = std::move(ids), offsets = std::move(offsets)](Tape& tp, int, const Matrix& g) {
                      for (std::size_t k = 0; k < ids.size(); ++k) {
                          if (!tp.requires_grad_of(ids[k])) continue;
                          tp.accumulate(ids[k], g.middleRows(offsets[k], tp.value_of(ids[k]).rows()));
                      }
                  });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    Tape& t = tape_of(parts.front());
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    bool grad = false;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw std::invalid_argument("concat_cols: row counts differ");
        cols += p.cols();
        grad = grad || p.requires_grad();
    }
    Matrix y(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
        y.middleCols(offset, p.cols()) = p.value();
        ids.push_back(p.index());
        offsets.push_back(offset);
        offset += p.cols();
    }
    return t.push(std::move(y), grad,
                  [ids = std::move(ids), offsets = std::move(offsets)](Tape& tp, int, const Matrix& g) {
                      for (std::size_t k = 0; k < ids.size(); ++k) {
                          if (!tp.requires_grad_of(ids[k])) continue;
                          tp.accumulate(ids[k], g.middleCols(offsets[k], tp.value_of(ids[k]).cols()));
                      }
                  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw std::out_of_range("slice_rows: range outside the operand");
    }
    Tape& t = tape_of(a);
    const int ia = a.index();
    return t.push(a.value().middleRows(start, count), a.requires_grad(),
                  [ia, start, count](Tape& tp, int, const Matrix& g) {
                      const Matrix& x = tp.value_of(ia);
                      Matrix full = Matrix::Zero(x.rows(), x.cols());
                      full.middleRows(start, count) = g;
                      tp.accumulate(ia, full);
                  });
}

Var row(Var a, Eigen::Index r) {
    if (r < 0 || r >= a.rows()) throw std::out_of_range("row: index outside the operand");
    Tape& t = tape_of(a);
    const int ia = a.index();
    return t.push(a.value().row(r).transpose(), a.requires_grad(), [ia, r](Tape& tp, int, const Matrix& g) {
        Matrix& dst = tp.grad_of(ia);
        const Matrix& x = tp.value_of(ia);
        if (dst.size() == 0) dst = Matrix::Zero(x.rows(), x.cols());
        dst.row(r) += g.transpose();
    });
}

Var pick(Var a, Eigen::Index i) {
    check_column(a, "pick");
    if (i < 0 || i >= a.rows()) throw std::out_of_range("pick: index outside the operand");
    Tape& t = tape_of(a);
    const int ia = a.index();
    Matrix y(1, 1);
    y(0, 0) = a.value()(i, 0);
    return t.push(std::move(y), a.requires_grad(), [ia, i](Tape& tp, int, const Matrix& g) {
        Matrix& dst = tp.grad_of(ia);
        if (dst.size() == 0) dst = Matrix::Zero(tp.value_of(ia).rows(), 1);
        dst(i, 0) += g(0, 0);
    });
}

Var weighted_pick(Var a, std::span<const int> ids, std::span<const double> weights) {
    check_column(a, "weighted_pick");
    if (ids.size() != weights.size()) throw std::invalid_argument("weighted_pick: ids/weights size mismatch");
    Tape& t = tape_of(a);
    const int ia = a.index();
    Matrix y(1, 1);
    double total = 0.0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] < 0 || ids[j] >= a.rows()) throw std::out_of_range("weighted_pick: id outside the operand");
        total += weights[j] * a.value()(ids[j], 0);
    }
    y(0, 0) = total;
    std::vector<int> id_copy(ids.begin(), ids.end());
    std::vector<double> w_copy(weights.begin(), weights.end());
    return t.push(std::move(y), a.requires_grad(),
                  [ia, id_copy = std::move(id_copy), w_copy = std::move(w_copy)](Tape& tp, int, const Matrix& g) {
                      Matrix& dst = tp.grad_of(ia);
                      if (dst.size() == 0) dst = Matrix::Zero(tp.value_of(ia).rows(), 1);
                      for (std::size_t j = 0; j < id_copy.size(); ++j) dst(id_copy[j], 0) += g(0, 0) * w_copy[j];
                  });
}

Var weighted_sum(Var a, const Vector& weights) {
    check_column(a, "weighted_sum");
    if (weights.size() != a.rows()) throw std::invalid_argument("weighted_sum: length mismatch");
    Tape& t = tape_of(a);
    const int ia = a.index();
    Matrix y(1, 1);
    y(0, 0) = weights.dot(a.value().col(0));
    return t.push(std::move(y), a.requires_grad(),
                  [ia, weights](Tape& tp, int, const Matrix& g) { tp.accumulate(ia, weights * g(0, 0)); });
}

Var squared_distance(Var a, const Vector& target) {
    check_column(a, "squared_distance");
    if (target.size() != a.rows()) throw std::invalid_argument("squared_distance: length mismatch");
    Tape& t = tape_of(a);
    const int ia = a.index();
    Matrix y(1, 1);
    y(0, 0) = (a.value().col(0) - target).squaredNorm();
    return t.push(std::move(y), a.requires_grad(), [ia, target](Tape& tp, int, const Matrix& g) {
        tp.accumulate(ia, (tp.value_of(ia).col(0) - target) * (2.0 * g(0, 0)));
    });
}

Var sum(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("sum: no parts");
    Tape& t = tape_of(parts.front());
    Matrix y = parts.front().value();
    bool grad = parts.front().requires_grad();
    std::vector<int> ids{parts.front().index()};
    for (std::size_t k = 1; k < parts.size(); ++k) {
        check_same_shape(parts.front(), parts[k], "sum");
        y += parts[k].value();
        grad = grad || parts[k].requires_grad();
        ids.push_back(parts[k].index());
    }
    return t.push(std::move(y), grad, [ids = std::move(ids)](Tape& tp, int, const Matrix& g) {
        for (int id : ids) tp.accumulate(id, g);
    });
}

}  // namespace tsdial::ad
