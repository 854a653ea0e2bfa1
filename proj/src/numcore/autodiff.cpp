#include "fdd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace fdd::num {

namespace {

void require(bool ok, const char* op, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

bool needs_grad(const Var& v) { return v->requires_grad; }

// C[n x m] += A[n x k] * B[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[n x k] += G[n x m] * B[k x m]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = g + i * m;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += gi[j] * bp[j];
      ci[p] += s;
    }
  }
}

// C[k x m] += A[n x k]^T * G[n x m]
void gemm_tn(const double* a, const double* g, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += av * gi[j];
    }
  }
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor(value.shape(), 0.0);
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

Var make_node(const char* op, Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  if (!value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by op '") + op + "'");
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->requires_grad = std::any_of(parents.begin(), parents.end(), needs_grad);
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

void backward(const Var& loss) {
  if (loss->value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss->value.shape()));
  }
  if (!loss->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad = Tensor(n->value.shape(), 0.0);
  }
  loss->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  require(k == bv.rows(), "matmul", av.shape(), bv.shape());
  Tensor out({n, m}, 0.0);
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), n, k, m);
  return make_node("matmul", std::move(out), {a, b}, [n, k, m](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    const double* g = self.grad.data().data();
    if (a->requires_grad) gemm_nt(g, b->value.data().data(), a->grad_buffer().data().data(), n, k, m);
    if (b->requires_grad) gemm_tn(a->value.data().data(), g, b->grad_buffer().data().data(), n, k, m);
  });
}

Var add(const Var& a, const Var& b) {
  require(a->value.shape() == b->value.shape(), "add", a->value.shape(), b->value.shape());
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_node("add", std::move(out), {a, b}, [](Node& self) {
    for (const Var& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require(a->value.shape() == b->value.shape(), "sub", a->value.shape(), b->value.shape());
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node("sub", std::move(out), {a, b}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      const Var& p = self.parents[k];
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a->value.shape() == b->value.shape(), "mul", a->value.shape(), b->value.shape());
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_node("mul", std::move(out), {a, b}, [](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      Tensor& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& x : out.data()) x *= s;
  return make_node("scale", std::move(out), {a}, [s](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var add_bias(const Var& a, const Var& bias) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  require(bias->value.size() == m, "add_bias", a->value.shape(), bias->value.shape());
  Tensor out = a->value;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias->value[j];
  return make_node("add_bias", std::move(out), {a, bias}, [n, m](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      Tensor& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g[j] += self.grad[i * m + j];
    }
  });
}

Var scale_rows(const Var& a, const Var& s) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  require(s->value.size() == n, "scale_rows", a->value.shape(), s->value.shape());
  Tensor out = a->value;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] *= s->value[i];
  return make_node("scale_rows", std::move(out), {a, s}, [n, m](Node& self) {
    const Var& a = self.parents[0];
    const Var& s = self.parents[1];
    if (a->requires_grad) {
      Tensor& g = a->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[i * m + j] * s->value[i];
    }
    if (s->requires_grad) {
      Tensor& g = s->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += self.grad[i * m + j] * a->value[i * m + j];
        g[i] += acc;
      }
    }
  });
}

Var sum(const Var& a) {
  return make_node("sum", Tensor::scalar(a->value.sum()), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0];
    for (double& x : g.data()) x += up;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a->value.size());
  return make_node("mean", Tensor::scalar(a->value.sum() / n), {a}, [n](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0] / n;
    for (double& x : g.data()) x += up;
  });
}

Var sq_norm(const Var& a) {
  return make_node("sq_norm", Tensor::scalar(a->value.sq_norm()), {a}, [](Node& self) {
    const Var& a = self.parents[0];
    Tensor& g = a->grad_buffer();
    const double up = 2.0 * self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * a->value[i];
  });
}

Var row_sq_norm(const Var& a) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  Tensor out({n, 1}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += a->value[i * m + j] * a->value[i * m + j];
  return make_node("row_sq_norm", std::move(out), {a}, [n, m](Node& self) {
    const Var& a = self.parents[0];
    Tensor& g = a->grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += 2.0 * self.grad[i] * a->value[i * m + j];
  });
}

Var row_norm(const Var& a) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  Tensor out({n, 1}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += a->value[i * m + j] * a->value[i * m + j];
    out[i] = std::sqrt(s);
  }
  return make_node("row_norm", std::move(out), {a}, [n, m](Node& self) {
    const Var& a = self.parents[0];
    Tensor& g = a->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const double r = self.value[i];
      if (r == 0.0) continue;
      const double c = self.grad[i] / r;
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += c * a->value[i * m + j];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0]->value.rows();
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    require(p->value.rows() == n, "concat_cols", parts[0]->value.shape(), p->value.shape());
    offsets.push_back(total);
    total += p->value.cols();
  }
  Tensor out({n, total}, 0.0);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k]->value;
    const std::size_t c = v.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data().data() + i * c, c, out.data().data() + i * total + offsets[k]);
  }
  return make_node("concat_cols", std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                   [n, total, offsets](Node& self) {
                     for (std::size_t k = 0; k < self.parents.size(); ++k) {
                       const Var& p = self.parents[k];
                       if (!p->requires_grad) continue;
                       Tensor& g = p->grad_buffer();
                       const std::size_t c = p->value.cols();
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           g[i * c + j] += self.grad[i * total + offsets[k] + j];
                     }
                   });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0]->value.cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p->value.cols() == c, "concat_rows", parts[0]->value.shape(), p->value.shape());
    rows += p->value.rows();
  }
  Tensor out({rows, c}, 0.0);
  std::size_t at = 0;
  for (const Var& p : parts) {
    std::copy(p->value.data().begin(), p->value.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(at));
    at += p->value.size();
  }
  return make_node("concat_rows", std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                   [](Node& self) {
                     std::size_t at = 0;
                     for (const Var& p : self.parents) {
                       const std::size_t n = p->value.size();
                       if (p->requires_grad) {
                         Tensor& g = p->grad_buffer();
                         for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[at + i];
                       }
                       at += n;
                     }
                   });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  if (begin > end || end > m) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for shape " + shape_str(a->value.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({n, w}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a->value[i * m + begin + j];
  return make_node("slice_cols", std::move(out), {a}, [n, m, w, begin](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * m + begin + j] += self.grad[i * w + j];
  });
}

Var reshape(const Var& a, Shape shape) {
  return make_node("reshape", a->value.reshaped(std::move(shape)), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out = a;
  for (std::size_t i = 0; i < n; ++i) {
    double* r = out.data().data() + i * m;
    const double mx = *std::max_element(r, r + m);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += (r[j] = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < m; ++j) r[j] /= s;
  }
  return out;
}

Var softmax_rows(const Var& a) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  return make_node("softmax_rows", softmax_rows(a->value), {a}, [n, m](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += self.grad[i * m + j] * self.value[i * m + j];
      for (std::size_t j = 0; j < m; ++j)
        g[i * m + j] += self.value[i * m + j] * (self.grad[i * m + j] - dot);
    }
  });
}

double mish(double x) { return x * std::tanh(softplus(x)); }

double mish_grad(double x) {
  const double t = std::tanh(softplus(x));
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return t + x * (1.0 - t * t) * sig;
}

Var mish(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = mish(x);
  return make_node("mish", std::move(out), {a}, [](Node& self) {
    const Var& a = self.parents[0];
    Tensor& g = a->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mish_grad(a->value[i]);
  });
}

Var tanh(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = std::tanh(x);
  return make_node("tanh", std::move(out), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var gather_rows(const Var& table, std::vector<std::size_t> rows) {
  const std::size_t t = table->value.rows(), m = table->value.cols();
  Tensor out({rows.size(), m}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       shape_str(table->value.shape()));
    }
    std::copy_n(table->value.data().data() + rows[i] * m, m, out.data().data() + i * m);
  }
  return make_node("gather_rows", std::move(out), {table}, [rows = std::move(rows), m](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) g[rows[i] * m + j] += self.grad[i * m + j];
  });
}

namespace {
Tensor group_sum(const Tensor& a, std::size_t group) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out(a.shape(), 0.0);
  std::vector<double> terms(group);
  for (std::size_t g0 = 0; g0 < n; g0 += group) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t r = 0; r < group; ++r) terms[r] = a[(g0 + r) * m + j];
      const double s = sorted_sum(terms);
      for (std::size_t r = g0; r < g0 + group; ++r) out[r * m + j] = s;
    }
  }
  return out;
}
}  // namespace

Var group_sum_broadcast(const Var& a, std::size_t group) {
  if (group == 0 || a->value.rows() % group != 0) {
    throw ShapeError("group_sum_broadcast: " + std::to_string(a->value.rows()) +
                     " rows not divisible into groups of " + std::to_string(group));
  }
  return make_node("group_sum_broadcast", group_sum(a->value, group), {a}, [group](Node& self) {
    Tensor back = group_sum(self.grad, group);
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
  });
}

Var normalize_groups(const Var& a, std::size_t group_rows, double target) {
  const std::size_t m = a->value.cols();
  const std::size_t len = group_rows * m;
  if (group_rows == 0 || a->value.size() % len != 0) {
    throw ShapeError("normalize_groups: shape " + shape_str(a->value.shape()) +
                     " not divisible into groups of " + std::to_string(group_rows) + " rows");
  }
  const std::size_t groups = a->value.size() / len;
  Tensor out = a->value;
  std::vector<double> norms(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<double> sq(len);
    for (std::size_t i = 0; i < len; ++i) sq[i] = out[g * len + i] * out[g * len + i];
    norms[g] = std::sqrt(sorted_sum(sq));
    if (norms[g] == 0.0) throw NumericalError("normalize_groups: zero-norm group");
    for (std::size_t i = g * len; i < (g + 1) * len; ++i) out[i] *= target / norms[g];
  }
  return make_node("normalize_groups", std::move(out), {a},
                   [norms = std::move(norms), len, target](Node& self) {
                     Tensor& g = self.parents[0]->grad_buffer();
                     for (std::size_t k = 0; k < norms.size(); ++k) {
                       // y = target * x / |x|;  dx = (target/|x|) (dy - xh <xh, dy>)
                       double dot = 0.0;
                       for (std::size_t i = k * len; i < (k + 1) * len; ++i)
                         dot += self.grad[i] * self.value[i] / target;
                       for (std::size_t i = k * len; i < (k + 1) * len; ++i)
                         g[i] += (target / norms[k]) * (self.grad[i] - dot * self.value[i] / target);
                     }
                   });
}

CVar cmatmul(const CVar& a, const CVar& b) {
  return {sub(matmul(a.re, b.re), matmul(a.im, b.im)), add(matmul(a.re, b.im), matmul(a.im, b.re))};
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps,
                     BatchStats* stats) {
  const std::size_t n = x->value.rows(), c = x->value.cols();
  require(gamma->value.size() == c && beta->value.size() == c, "batch_norm", x->value.shape(),
          gamma->value.shape());
  Tensor mu({c}, 0.0), var({c}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) mu[j] += x->value[i * c + j];
  for (std::size_t j = 0; j < c; ++j) mu[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x->value[i * c + j] - mu[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) var[j] /= static_cast<double>(n);

  Tensor inv_std({c}, 0.0), xhat(x->value.shape(), 0.0), out(x->value.shape(), 0.0);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      xhat[k] = (x->value[k] - mu[j]) * inv_std[j];
      out[k] = gamma->value[j] * xhat[k] + beta->value[j];
    }
  if (stats) *stats = {mu, var};

  return make_node("batch_norm_train", std::move(out), {x, gamma, beta},
                   [n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     const Var& x = self.parents[0];
                     const Var& gamma = self.parents[1];
                     const Var& beta = self.parents[2];
                     std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < c; ++j) {
                         sum_g[j] += self.grad[i * c + j];
                         sum_gx[j] += self.grad[i * c + j] * xhat[i * c + j];
                       }
                     if (beta->requires_grad) {
                       Tensor& g = beta->grad_buffer();
                       for (std::size_t j = 0; j < c; ++j) g[j] += sum_g[j];
                     }
                     if (gamma->requires_grad) {
                       Tensor& g = gamma->grad_buffer();
                       for (std::size_t j = 0; j < c; ++j) g[j] += sum_gx[j];
                     }
                     if (x->requires_grad) {
                       Tensor& g = x->grad_buffer();
                       const double nn = static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) {
                           const std::size_t k = i * c + j;
                           const double gm = gamma->value[j];
                           g[k] += gm * inv_std[j] / nn *
                                   (nn * self.grad[k] - sum_g[j] - xhat[k] * sum_gx[j]);
                         }
                     }
                   });
}

Var batch_norm_infer(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                     const Tensor& running_var, double eps) {
  const std::size_t n = x->value.rows(), c = x->value.cols();
  require(gamma->value.size() == c && running_mean.size() == c, "batch_norm", x->value.shape(),
          running_mean.shape());
  Tensor inv_std({c}, 0.0), xhat(x->value.shape(), 0.0), out(x->value.shape(), 0.0);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      xhat[k] = (x->value[k] - running_mean[j]) * inv_std[j];
      out[k] = gamma->value[j] * xhat[k] + beta->value[j];
    }
  return make_node("batch_norm_infer", std::move(out), {x, gamma, beta},
                   [n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     const Var& x = self.parents[0];
                     const Var& gamma = self.parents[1];
                     const Var& beta = self.parents[2];
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < c; ++j) {
                         const std::size_t k = i * c + j;
                         if (x->requires_grad) x->grad_buffer()[k] += self.grad[k] * gamma->value[j] * inv_std[j];
                         if (gamma->requires_grad) gamma->grad_buffer()[j] += self.grad[k] * xhat[k];
                         if (beta->requires_grad) beta->grad_buffer()[j] += self.grad[k];
                       }
                   });
}

void Binder::train(Tensor& t) {
  if (leaves_.contains(&t)) return;
  Var leaf = parameter(t);
  leaves_.emplace(&t, leaf);
  entries_.push_back({&t, leaf});
}

Var Binder::bind(const Tensor& t) {
  if (auto it = leaves_.find(&t); it != leaves_.end()) return it->second;
  Var c = constant(t);
  leaves_.emplace(&t, c);
  return c;
}

bool Binder::trainable(const Tensor& t) const {
  auto it = leaves_.find(&t);
  return it != leaves_.end() && it->second->requires_grad;
}

}  // namespace fdd::num
