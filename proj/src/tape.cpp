#include "drex/tape.hpp"

#include <cmath>

namespace drex {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
    throw ContractError(std::string(op) + ": operands must live on the same tape");
  }
}

void check_column(const Mat& m, const char* op) {
  if (m.cols() != 1) {
    throw DimensionError(std::string(op) + ": expected a column vector, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace

Var Tape::leaf(const Mat* external, bool trainable) {
  if (external == nullptr) throw ContractError("Tape::leaf: null external storage");
  Node n;
  n.external = external;
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Mat value, bool trainable) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(double scalar) { return constant(Mat::Constant(1, 1, scalar)); }

void Tape::check_owner(Var v, const char* op) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ContractError(std::string(op) + ": variable does not belong to this tape");
  }
}

const Mat& Tape::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

const Mat& Tape::value(Var v) const {
  check_owner(v, "Tape::value");
  return val(v.id);
}

bool Tape::needs_grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.requires_grad && n.mark == sweep_;
}

void Tape::add_grad(int id, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad || n.mark != sweep_) return;
  n.grad += g;
}

Mat& Tape::grad_ref(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

int Tape::emit(Mat value, std::vector<int> parents, BackFn back) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) {
    if (nodes_[static_cast<std::size_t>(p)].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  n.parents = std::move(parents);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat Tape::gradient(Var v) const {
  check_owner(v, "Tape::gradient");
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.mark != sweep_ || !n.requires_grad || n.grad.size() == 0) {
    return Mat::Zero(val(v.id).rows(), val(v.id).cols());
  }
  return n.grad;
}

void Tape::accumulate_gradient(Var v, Mat& dst, double scale) const {
  check_owner(v, "Tape::accumulate_gradient");
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.mark != sweep_ || !n.requires_grad || n.grad.size() == 0) return;
  if (dst.rows() != n.grad.rows() || dst.cols() != n.grad.cols()) {
    throw DimensionError("accumulate_gradient: destination is " + shape_str(dst) +
                         " but gradient is " + shape_str(n.grad));
  }
  dst += scale * n.grad;
}

void Tape::backward(Var root) {
  check_owner(root, "Tape::backward");
  if (val(root.id).size() != 1) {
    throw ContractError("Tape::backward: root must be 1x1, got " + shape_str(val(root.id)));
  }
  ++sweep_;

  std::vector<int> stack{root.id};
  nodes_[static_cast<std::size_t>(root.id)].mark = sweep_;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (int p : nodes_[static_cast<std::size_t>(id)].parents) {
      Node& pn = nodes_[static_cast<std::size_t>(p)];
      if (pn.mark != sweep_) {
        pn.mark = sweep_;
        stack.push_back(p);
      }
    }
  }

  for (int id = 0; id <= root.id; ++id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.mark == sweep_ && n.requires_grad) {
      n.grad = Mat::Zero(val(id).rows(), val(id).cols());
    }
  }

  if (!nodes_[static_cast<std::size_t>(root.id)].requires_grad) return;

  grad_ref(root.id)(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.mark == sweep_ && n.requires_grad && n.back) {
      n.back(*this, id);
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: " + shape_str(av) + " * " + shape_str(bv));
  }
  const int id = t.emit(av * bv, {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(a)) t.add_grad(a, g * t.val(b).transpose());
    if (t.needs_grad(b)) t.add_grad(b, t.val(a).transpose() * g);
  });
  return Var{&t, id};
}

Var matmul_tA(Var a, Var b) {
  check_same_tape(a, b, "matmul_tA");
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows()) {
    throw DimensionError("matmul_tA: " + shape_str(av) + "^T * " + shape_str(bv));
  }
  const int id = t.emit(av.transpose() * bv, {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(a)) t.add_grad(a, t.val(b) * g.transpose());
    if (t.needs_grad(b)) t.add_grad(b, t.val(a) * g);
  });
  return Var{&t, id};
}

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw DimensionError("add: " + shape_str(av) + " vs " + shape_str(bv));
  }
  const int id = t.emit(av + bv, {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    t.add_grad(a, g);
    t.add_grad(b, g);
  });
  return Var{&t, id};
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw DimensionError("sub: " + shape_str(av) + " vs " + shape_str(bv));
  }
  const int id = t.emit(av - bv, {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    t.add_grad(a, g);
    t.add_grad(b, -g);
  });
  return Var{&t, id};
}

Var hadamard(Var a, Var b) {
  check_same_tape(a, b, "hadamard");
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw DimensionError("hadamard: " + shape_str(av) + " vs " + shape_str(bv));
  }
  const int id =
      t.emit(av.cwiseProduct(bv), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
        const Mat& g = t.grad_ref(self);
        if (t.needs_grad(a)) t.add_grad(a, g.cwiseProduct(t.val(b)));
        if (t.needs_grad(b)) t.add_grad(b, g.cwiseProduct(t.val(a)));
      });
  return Var{&t, id};
}

Var scale(Var x, double c) {
  Tape& t = *x.tape;
  const int id = t.emit(c * t.value(x), {x.id}, [x = x.id, c](Tape& t, int self) {
    t.add_grad(x, c * t.grad_ref(self));
  });
  return Var{&t, id};
}

Var one_minus(Var x) {
  Tape& t = *x.tape;
  const int id = t.emit((1.0 - t.value(x).array()).matrix(), {x.id}, [x = x.id](Tape& t, int self) {
    t.add_grad(x, -t.grad_ref(self));
  });
  return Var{&t, id};
}

Var add_rowwise(Var m, Var b) {
  check_same_tape(m, b, "add_rowwise");
  Tape& t = *m.tape;
  const Mat& mv = t.value(m);
  const Mat& bv = t.value(b);
  check_column(bv, "add_rowwise");
  if (mv.cols() != bv.rows()) {
    throw DimensionError("add_rowwise: matrix " + shape_str(mv) + " vs bias length " +
                         std::to_string(bv.rows()));
  }
  Mat out = mv;
  out.rowwise() += bv.transpose().row(0);
  const int id = t.emit(std::move(out), {m.id, b.id}, [m = m.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    t.add_grad(m, g);
    if (t.needs_grad(b)) t.add_grad(b, g.colwise().sum().transpose());
  });
  return Var{&t, id};
}

Var elementwise(Activation kind, Var x) {
  Tape& t = *x.tape;
  Mat out = elementwise(kind, t.value(x));
  const int id = t.emit(std::move(out), {x.id}, [x = x.id, kind](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    const Mat& y = t.val(self);
    switch (kind) {
      case Activation::kSigmoid:
        t.add_grad(x, (g.array() * y.array() * (1.0 - y.array())).matrix());
        break;
      case Activation::kTanh:
        t.add_grad(x, (g.array() * (1.0 - y.array().square())).matrix());
        break;
      case Activation::kRelu:
        t.add_grad(x, (g.array() * (t.val(x).array() > 0.0).cast<double>()).matrix());
        break;
    }
  });
  return Var{&t, id};
}

Var softmax(Var scores) {
  Tape& t = *scores.tape;
  const Mat& sv = t.value(scores);
  check_column(sv, "softmax");
  Mat out = softmax(Vec(sv.col(0)));
  const int id = t.emit(std::move(out), {scores.id}, [s = scores.id](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    const Mat& y = t.val(self);
    const double dot = (y.array() * g.array()).sum();
    t.add_grad(s, (y.array() * (g.array() - dot)).matrix());
  });
  return Var{&t, id};
}

Var concat_v(Var a, Var b) {
  check_same_tape(a, b, "concat_v");
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  check_column(av, "concat_v");
  check_column(bv, "concat_v");
  Mat out(av.rows() + bv.rows(), 1);
  out.topRows(av.rows()) = av;
  out.bottomRows(bv.rows()) = bv;
  const int id = t.emit(std::move(out), {a.id, b.id},
                        [a = a.id, b = b.id, na = av.rows(), nb = bv.rows()](Tape& t, int self) {
                          const Mat& g = t.grad_ref(self);
                          t.add_grad(a, g.topRows(na));
                          t.add_grad(b, g.bottomRows(nb));
                        });
  return Var{&t, id};
}

Var squared_norm(Var x) {
  Tape& t = *x.tape;
  const double v = t.value(x).squaredNorm();
  const int id = t.emit(Mat::Constant(1, 1, v), {x.id}, [x = x.id](Tape& t, int self) {
    const double g = t.grad_ref(self)(0, 0);
    t.add_grad(x, 2.0 * g * t.val(x));
  });
  return Var{&t, id};
}

Var sum_scalars(Tape& tape, const std::vector<Var>& xs) {
  if (xs.empty()) throw ContractError("sum_scalars: empty input");
  double total = 0.0;
  std::vector<int> parents;
  parents.reserve(xs.size());
  for (Var v : xs) {
    if (v.tape != &tape) throw ContractError("sum_scalars: operands must live on the same tape");
    const Mat& m = tape.value(v);
    if (m.size() != 1) throw DimensionError("sum_scalars: expected 1x1, got " + shape_str(m));
    total += m(0, 0);
    parents.push_back(v.id);
  }
  std::vector<int> captured = parents;
  const int id = tape.emit(Mat::Constant(1, 1, total), std::move(parents),
                           [ps = std::move(captured)](Tape& t, int self) {
                             const Mat& g = t.grad_ref(self);
                             for (int p : ps) t.add_grad(p, g);
                           });
  return Var{&tape, id};
}

Var stack_rows(Tape& tape, const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty input");
  const Mat& first = tape.value(rows[0]);
  check_column(first, "stack_rows");
  const Eigen::Index d = first.rows();
  Mat out(static_cast<Eigen::Index>(rows.size()), d);
  std::vector<int> parents;
  parents.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Var v = rows[i];
    if (v.tape != &tape) throw ContractError("stack_rows: operands must live on the same tape");
    const Mat& m = tape.value(v);
    check_column(m, "stack_rows");
    if (m.rows() != d) {
      throw DimensionError("stack_rows: row " + std::to_string(i) + " has length " +
                           std::to_string(m.rows()) + ", expected " + std::to_string(d));
    }
    out.row(static_cast<Eigen::Index>(i)) = m.transpose();
    parents.push_back(v.id);
  }
  std::vector<int> captured = parents;
  const int id = tape.emit(std::move(out), std::move(parents),
                           [ps = std::move(captured)](Tape& t, int self) {
                             const Mat& g = t.grad_ref(self);
                             for (std::size_t i = 0; i < ps.size(); ++i) {
                               t.add_grad(ps[i], g.row(static_cast<Eigen::Index>(i)).transpose());
                             }
                           });
  return Var{&tape, id};
}

Var project(Var p, Var b, Var x) {
  // shapes are validated by matmul_tA / add
  return add(matmul_tA(p, x), b);
}

}  // namespace drex
