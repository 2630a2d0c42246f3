#pragma once

#include <functional>
#include <vector>

#include "drex/linalg.hpp"

namespace drex {

class Tape;

// Handle to a tape node. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode gradient tape over dense matrices. Nodes are appended in
// forward order, so ids form a topological order and backward() is a single
// reverse sweep. backward() first marks the nodes reachable from the root and
// zeroes their gradients, so a tape can be replayed; gradients of nodes the
// root does not depend on read as zero. Not safe to share across threads
// while recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf over caller-owned storage; the pointer must outlive the tape.
  Var leaf(const Mat* external, bool trainable = true);
  Var leaf(Mat value, bool trainable = true);
  Var constant(Mat value);
  Var constant(double scalar);

  const Mat& value(Var v) const;
  // d(root)/d(v) from the last backward(); zeros when v was unreachable or
  // does not require gradients.
  Mat gradient(Var v) const;
  // dst += scale * gradient(v); skips the copy when the gradient is zero.
  void accumulate_gradient(Var v, Mat& dst, double scale = 1.0) const;

  // root must be 1x1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // --- recording primitives used by the free operations ---
  using BackFn = std::function<void(Tape&, int self)>;
  int emit(Mat value, std::vector<int> parents, BackFn back);
  const Mat& val(int id) const;
  bool needs_grad(int id) const;
  // Adds g to the stored gradient if the node participates in the sweep.
  void add_grad(int id, const Mat& g);
  Mat& grad_ref(int id);

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    int mark = 0;
    bool requires_grad = false;
    std::vector<int> parents;
    BackFn back;
  };

  void check_owner(Var v, const char* op) const;

  std::vector<Node> nodes_;
  int sweep_ = 0;
};

// Free operations. Shape violations throw DimensionError naming both shapes.
Var matmul(Var a, Var b);                // A B
Var matmul_tA(Var a, Var b);             // A^T B
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var x, double c);
Var one_minus(Var x);                    // 1 - x, elementwise
Var add_rowwise(Var m, Var b);           // m + 1 b^T, b a column vector
Var elementwise(Activation kind, Var x);
Var softmax(Var scores);                 // column vector
Var concat_v(Var a, Var b);              // stack column vectors
Var squared_norm(Var x);                 // 1x1
Var sum_scalars(Tape& tape, const std::vector<Var>& xs);
Var stack_rows(Tape& tape, const std::vector<Var>& rows);  // n column d-vectors -> n x d
Var project(Var p, Var b, Var x);        // P^T x + b

}  // namespace drex
