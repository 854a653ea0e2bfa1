#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fdd/tensor.hpp"

namespace fdd::num {

struct Node;
using Var = std::shared_ptr<Node>;

// One vertex of the reverse-mode tape. `backward_fn` reads `grad` and
// accumulates into the parents' grads.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  const char* op = "leaf";

  bool is_leaf() const { return parents.empty(); }
  Tensor& grad_buffer();
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Builds a node from a forward value; the backward rule is only kept when
// at least one parent needs a gradient. Non-finite values throw.
Var make_node(const char* op, Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn);

// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
// Interior gradients are reset on each call, leaf gradients are not.
void backward(const Var& loss);

// Complex tensor as a real/imaginary pair.
struct CVar {
  Var re;
  Var im;
};

// ---- forward ops ----------------------------------------------------------
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_bias(const Var& a, const Var& bias);   // bias has a.cols() entries
Var scale_rows(const Var& a, const Var& s);    // s is rows x 1
Var sum(const Var& a);
Var mean(const Var& a);
Var sq_norm(const Var& a);
Var row_sq_norm(const Var& a);                 // rows x 1
Var row_norm(const Var& a);                    // rows x 1, zero gradient at 0
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var reshape(const Var& a, Shape shape);
Var softmax_rows(const Var& a);
Var mish(const Var& a);
Var tanh(const Var& a);
Var gather_rows(const Var& table, std::vector<std::size_t> rows);
// out[r] = sum of the rows in r's block of `group` consecutive rows. Block
// sums and norms below are invariant to the row order within a block.
Var group_sum_broadcast(const Var& a, std::size_t group);
// Each block of `group_rows` rows is rescaled to Frobenius norm `target`.
Var normalize_groups(const Var& a, std::size_t group_rows, double target);

CVar cmatmul(const CVar& a, const CVar& b);

struct BatchStats {
  Tensor mean;
  Tensor var;
};
// Train mode: normalizes with batch statistics (biased variance) and reports them.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps,
                     BatchStats* stats);
Var batch_norm_infer(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                     const Tensor& running_var, double eps);

// ---- plain (non-taped) helpers -------------------------------------------
double mish(double x);
double mish_grad(double x);
Tensor softmax_rows(const Tensor& a);

// Maps parameter tensors to graph leaves for one forward pass. Tensors
// registered with `train` become gradient-carrying leaves; everything else
// enters the graph as a constant.
class Binder {
 public:
  void train(Tensor& t);
  Var bind(const Tensor& t);
  bool trainable(const Tensor& t) const;

  struct Entry {
    Tensor* tensor;
    Var leaf;
  };
  const std::vector<Entry>& trainables() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<const Tensor*, Var> leaves_;
};

}  // namespace fdd::num
