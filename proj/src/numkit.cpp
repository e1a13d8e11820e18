#include "nosm/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "nosm/error.hpp"

namespace nosm::num {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorKind::shape, std::string(op) + ": shape mismatch " + shape_string(a) +
                             " vs " + shape_string(b));
}

void require_rank(const char* op, const Array& a, std::size_t rank) {
  if (a.rank() != rank) {
    fail(ErrorKind::shape, std::string(op) + ": expected rank " +
                               std::to_string(rank) + ", got " +
                               shape_string(a.shape()));
  }
}

void require_same(const char* op, const Array& a, const Array& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

void axpy(std::span<double> y, std::span<const double> x, double alpha = 1.0) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// Array -------------------------------------------------------------------

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    fail(ErrorKind::shape, "array of shape " + shape_string(shape_) + " given " +
                               std::to_string(data_.size()) + " values");
  }
}

Array Array::vector(std::initializer_list<double> values) {
  return Array({values.size()}, std::vector<double>(values));
}

Array Array::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Array(std::move(s), std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols,
                    std::initializer_list<double> values) {
  return Array({rows, cols}, std::vector<double>(values));
}

std::size_t Array::rows() const {
  return shape_.empty() ? 0 : shape_[0];
}

std::size_t Array::cols() const {
  if (shape_.size() < 2) return 1;
  return data_.size() / shape_[0];
}

std::span<double> Array::row(std::size_t r) {
  std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Array::row(std::size_t r) const {
  std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

// Parameters --------------------------------------------------------------

Parameter::Parameter(std::string n, Array v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}

Parameter& ParameterStore::add(const std::string& name, Shape shape) {
  if (index_.count(name)) {
    fail(ErrorKind::contract, "duplicate parameter name '" + name + "'");
  }
  index_[name] = params_.size();
  params_.push_back(std::make_unique<Parameter>(name, Array(std::move(shape))));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterStore::get(const std::string& name) {
  Parameter* p = find(name);
  if (!p) fail(ErrorKind::contract, "unknown parameter '" + name + "'");
  return *p;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  const Parameter* p = find(name);
  if (!p) fail(ErrorKind::contract, "unknown parameter '" + name + "'");
  return *p;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::entry_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<Array> ParameterStore::snapshot() const {
  std::vector<Array> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Array>& values) {
  if (values.size() != params_.size()) {
    fail(ErrorKind::contract, "snapshot has wrong parameter count");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    require_same("restore", params_[i]->value, values[i]);
    params_[i]->value = values[i];
  }
}

// Rng ---------------------------------------------------------------------

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) fail(ErrorKind::argument, "Rng::below(0)");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

void Rng::fill_uniform(Array& a, double lo, double hi) {
  for (double& v : a.data()) v = uniform(lo, hi);
}

// Graph -------------------------------------------------------------------

const Array& Var::value() const { return graph_->value(*this); }

double Var::scalar() const {
  const Array& v = value();
  if (v.size() != 1) {
    fail(ErrorKind::shape, "scalar() on array of shape " + shape_string(v.shape()));
  }
  return v[0];
}

Var Graph::constant(Array value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, {}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{{}, {}, &p, {}});
  auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_[&p] = id;
  return Var(this, id);
}

Var Graph::row(Parameter& p, std::size_t r) {
  require_rank("row", p.value, 2);
  if (r >= p.value.rows()) {
    fail(ErrorKind::shape, "row " + std::to_string(r) + " out of range for " +
                               p.name + " " + shape_string(p.value.shape()));
  }
  auto src = p.value.row(r);
  Array v({src.size()}, std::vector<double>(src.begin(), src.end()));
  Parameter* target = &p;
  return custom(std::move(v), [target, r](Graph&, const Array& g) {
    axpy(target->grad.row(r), g.data());
  });
}

Var Graph::custom(Array value, Backward backward) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, std::move(backward)});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Array& Graph::value(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.param ? n.param->value : n.value;
}

Array& Graph::grad(Var v) {
  Node& n = nodes_[v.id()];
  return n.param ? n.param->grad : n.grad;
}

void Graph::backward(Var loss) {
  if (value(loss).size() != 1) {
    fail(ErrorKind::shape, "backward from non-scalar " +
                               shape_string(value(loss).shape()));
  }
  for (Node& n : nodes_) {
    if (!n.param) n.grad = Array(n.value.shape(), 0.0);
  }
  grad(loss)[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, n.grad);
  }
}

// Primitives --------------------------------------------------------------

Var matvec(Var w, Var x) {
  const Array& W = w.value();
  const Array& X = x.value();
  require_rank("matvec", W, 2);
  require_rank("matvec", X, 1);
  const std::size_t m = W.rows(), n = W.cols();
  if (X.size() != n) shape_error("matvec", W.shape(), X.shape());
  Array out({m}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = W.data().data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * X[j];
    out[i] = acc;
  }
  return w.graph().custom(std::move(out), [w, x, m, n](Graph& g, const Array& go) {
    const Array& W = g.value(w);
    const Array& X = g.value(x);
    Array& gw = g.grad(w);
    Array& gx = g.grad(x);
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = go[i];
      if (gi == 0.0) continue;
      double* gwr = gw.data().data() + i * n;
      const double* wr = W.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        gwr[j] += gi * X[j];
        gx[j] += gi * wr[j];
      }
    }
  });
}

Var affine(Var x, Var w, Var b) {
  const Array& B = b.value();
  const Array& W = w.value();
  require_rank("affine", W, 2);
  if (B.rank() != 1 || B.size() != W.rows()) shape_error("affine", W.shape(), B.shape());
  return add(matvec(w, x), b);
}

Var add(Var a, Var b) {
  const Array& A = a.value();
  const Array& B = b.value();
  require_same("add", A, B);
  Array out = A;
  axpy(out.data(), B.data());
  return a.graph().custom(std::move(out), [a, b](Graph& g, const Array& go) {
    axpy(g.grad(a).data(), go.data());
    axpy(g.grad(b).data(), go.data());
  });
}

Var sub(Var a, Var b) {
  const Array& A = a.value();
  const Array& B = b.value();
  require_same("sub", A, B);
  Array out = A;
  axpy(out.data(), B.data(), -1.0);
  return a.graph().custom(std::move(out), [a, b](Graph& g, const Array& go) {
    axpy(g.grad(a).data(), go.data());
    axpy(g.grad(b).data(), go.data(), -1.0);
  });
}

Var mul(Var a, Var b) {
  const Array& A = a.value();
  const Array& B = b.value();
  require_same("mul", A, B);
  Array out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return a.graph().custom(std::move(out), [a, b](Graph& g, const Array& go) {
    const Array& A = g.value(a);
    const Array& B = g.value(b);
    Array& ga = g.grad(a);
    Array& gb = g.grad(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga[i] += go[i] * B[i];
      gb[i] += go[i] * A[i];
    }
  });
}

Var scale(Var a, double c) {
  Array out = a.value();
  for (double& v : out.data()) v *= c;
  return a.graph().custom(std::move(out), [a, c](Graph& g, const Array& go) {
    axpy(g.grad(a).data(), go.data(), c);
  });
}

Var one_minus(Var a) {
  Array out = a.value();
  for (double& v : out.data()) v = 1.0 - v;
  return a.graph().custom(std::move(out), [a](Graph& g, const Array& go) {
    axpy(g.grad(a).data(), go.data(), -1.0);
  });
}

Var sum(std::span<const Var> terms) {
  if (terms.empty()) fail(ErrorKind::argument, "sum of no terms");
  Array out = terms[0].value();
  for (std::size_t t = 1; t < terms.size(); ++t) {
    const Array& T = terms[t].value();
    require_same("sum", out, T);
    axpy(out.data(), T.data());
  }
  std::vector<Var> parts(terms.begin(), terms.end());
  return terms[0].graph().custom(std::move(out),
                                 [parts = std::move(parts)](Graph& g, const Array& go) {
                                   for (Var p : parts) axpy(g.grad(p).data(), go.data());
                                 });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::argument, "concat of no parts");
  std::vector<double> data;
  for (Var p : parts) {
    require_rank("concat", p.value(), 1);
    auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].graph().custom(Array::vector(std::move(data)),
                                 [ps = std::move(ps)](Graph& g, const Array& go) {
                                   std::size_t off = 0;
                                   for (Var p : ps) {
                                     Array& gp = g.grad(p);
                                     axpy(gp.data(), go.data().subspan(off, gp.size()));
                                     off += gp.size();
                                   }
                                 });
}

Var reshape(Var a, Shape shape) {
  const Array& A = a.value();
  if (shape_product(shape) != A.size()) shape_error("reshape", A.shape(), shape);
  std::vector<double> d(A.data().begin(), A.data().end());
  return a.graph().custom(Array(std::move(shape), std::move(d)),
                          [a](Graph& g, const Array& go) {
                            axpy(g.grad(a).data(), go.data());
                          });
}

Var tanh(Var a) {
  Array out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  Graph& graph = a.graph();
  // Backward reads the output; this is the id custom() is about to assign.
  Var self(&graph, static_cast<std::uint32_t>(graph.node_count()));
  return graph.custom(std::move(out), [a, self](Graph& g, const Array& go) {
    const Array& y = g.value(self);
    Array& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Array out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  Graph& graph = a.graph();
  Var self(&graph, static_cast<std::uint32_t>(graph.node_count()));
  return graph.custom(std::move(out), [a, self](Graph& g, const Array& go) {
    const Array& y = g.value(self);
    Array& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
  });
}

Var maximum(Var a, Var b) {
  const Array& A = a.value();
  const Array& B = b.value();
  require_same("maximum", A, B);
  Array out = A;
  std::vector<bool> from_a(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    from_a[i] = A[i] >= B[i];
    out[i] = from_a[i] ? A[i] : B[i];
  }
  return a.graph().custom(std::move(out), [a, b, from_a = std::move(from_a)](
                                              Graph& g, const Array& go) {
    Array& ga = g.grad(a);
    Array& gb = g.grad(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      (from_a[i] ? ga : gb)[i] += go[i];
    }
  });
}

Var max_reduce(Var a) {
  const Array& A = a.value();
  if (A.size() == 0) fail(ErrorKind::argument, "max_reduce of empty array");
  auto d = A.data();
  std::size_t arg = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
  return a.graph().custom(Array::vector({A[arg]}), [a, arg](Graph& g, const Array& go) {
    g.grad(a)[arg] += go[0];
  });
}

Var row_max(Var m) {
  const Array& M = m.value();
  require_rank("row_max", M, 2);
  const std::size_t rows = M.rows(), cols = M.cols();
  if (cols == 0) fail(ErrorKind::argument, "row_max of matrix with no columns");
  std::vector<std::size_t> arg(rows);
  Array out({rows}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = M.row(r);
    arg[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    out[r] = row[arg[r]];
  }
  return m.graph().custom(std::move(out), [m, cols, arg = std::move(arg)](
                                              Graph& g, const Array& go) {
    Array& gm = g.grad(m);
    for (std::size_t r = 0; r < arg.size(); ++r) gm[r * cols + arg[r]] += go[r];
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) fail(ErrorKind::argument, "stack_rows of no rows");
  const std::size_t n = rows[0].size();
  std::vector<double> data;
  data.reserve(rows.size() * n);
  for (Var r : rows) {
    require_rank("stack_rows", r.value(), 1);
    if (r.size() != n) shape_error("stack_rows", rows[0].shape(), r.shape());
    auto d = r.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  std::vector<Var> rs(rows.begin(), rows.end());
  return rows[0].graph().custom(Array({rs.size(), n}, std::move(data)),
                                [rs, n](Graph& g, const Array& go) {
                                  for (std::size_t i = 0; i < rs.size(); ++i) {
                                    axpy(g.grad(rs[i]).data(), go.data().subspan(i * n, n));
                                  }
                                });
}

Var pick_row(Var m, std::size_t r) {
  const Array& M = m.value();
  require_rank("pick_row", M, 2);
  if (r >= M.rows()) {
    fail(ErrorKind::shape, "pick_row: row " + std::to_string(r) + " of " + shape_string(M.shape()));
  }
  auto src = M.row(r);
  const std::size_t n = src.size();
  return m.graph().custom(Array({n}, std::vector<double>(src.begin(), src.end())),
                          [m, r, n](Graph& g, const Array& go) {
                            axpy(g.grad(m).data().subspan(r * n, n), go.data());
                          });
}

Var mlp_tanh(std::span<const Var> inputs, Var w, Var b) {
  if (inputs.empty()) fail(ErrorKind::argument, "mlp_tanh with no inputs");
  Var x = inputs.size() == 1 ? inputs[0] : concat(inputs);
  return tanh(affine(x, w, b));
}

Var log_softmax_at(Var logits, std::size_t index, std::ptrdiff_t excluded) {
  const Array& L = logits.value();
  require_rank("log_softmax_at", L, 1);
  const std::size_t n = L.size();
  if (index >= n || static_cast<std::ptrdiff_t>(index) == excluded) {
    fail(ErrorKind::argument, "log_softmax_at: index " + std::to_string(index) +
                                  " outside support of size " + std::to_string(n));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::ptrdiff_t>(i) != excluded) mx = std::max(mx, L[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::ptrdiff_t>(i) != excluded) z += std::exp(L[i] - mx);
  }
  const double lse = mx + std::log(z);
  std::vector<double> probs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::ptrdiff_t>(i) != excluded) probs[i] = std::exp(L[i] - lse);
  }
  return logits.graph().custom(
      Array::vector({L[index] - lse}),
      [logits, index, probs = std::move(probs)](Graph& g, const Array& go) {
        Array& gl = g.grad(logits);
        for (std::size_t i = 0; i < probs.size(); ++i) gl[i] -= go[0] * probs[i];
        gl[index] += go[0];
      });
}

Var conv_valid(Var units, Var kernels, Var bias) {
  const Array& U = units.value();
  const Array& Q = kernels.value();
  const Array& B = bias.value();
  require_rank("conv_valid", U, 2);
  require_rank("conv_valid", Q, 3);
  const std::size_t n = U.shape()[0], e = U.shape()[1];
  const std::size_t f = Q.shape()[0], k = Q.shape()[1];
  if (Q.shape()[2] != e) shape_error("conv_valid", U.shape(), Q.shape());
  if (B.rank() != 1 || B.size() != f) shape_error("conv_valid", Q.shape(), B.shape());
  if (n < k) {
    fail(ErrorKind::contract, "conv_valid: sequence length " + std::to_string(n) +
                                  " shorter than kernel width " + std::to_string(k));
  }
  const std::size_t len = n - k + 1;
  const std::size_t window = k * e;
  Array out({f, len}, 0.0);
  for (std::size_t l = 0; l < f; ++l) {
    const double* q = Q.data().data() + l * window;
    for (std::size_t j = 0; j < len; ++j) {
      const double* u = U.data().data() + j * e;
      double acc = B[l];
      for (std::size_t t = 0; t < window; ++t) acc += q[t] * u[t];
      out.at(l, j) = acc;
    }
  }
  return units.graph().custom(
      std::move(out), [units, kernels, bias, f, len, window, e](Graph& g, const Array& go) {
        const Array& U = g.value(units);
        const Array& Q = g.value(kernels);
        Array& gu = g.grad(units);
        Array& gq = g.grad(kernels);
        Array& gb = g.grad(bias);
        for (std::size_t l = 0; l < f; ++l) {
          const double* q = Q.data().data() + l * window;
          double* gql = gq.data().data() + l * window;
          for (std::size_t j = 0; j < len; ++j) {
            const double gij = go.at(l, j);
            if (gij == 0.0) continue;
            const double* u = U.data().data() + j * e;
            double* guj = gu.data().data() + j * e;
            gb[l] += gij;
            for (std::size_t t = 0; t < window; ++t) {
              gql[t] += gij * u[t];
              guj[t] += gij * q[t];
            }
          }
        }
      });
}

Var conv_feature_map(Var units, Var kernel, Var bias) {
  const Array& Q = kernel.value();
  require_rank("conv_feature_map", Q, 2);
  Var bank = reshape(kernel, {1, Q.shape()[0], Q.shape()[1]});
  Var maps = conv_valid(units, bank, bias);
  return tanh(reshape(maps, {maps.value().shape()[1]}));
}

LstmState lstm_step(const LstmWeights& w, Var h, Var c, Var x) {
  Graph& g = h.graph();
  const std::size_t d = h.size();
  if (c.size() != d) shape_error("lstm_step", h.shape(), c.shape());
  for (Parameter* p : {w.input_w, w.forget_w, w.output_w, w.cell_w}) {
    if (!p) fail(ErrorKind::contract, "lstm_step: missing gate weights");
    if (p->value.rank() != 2 || p->value.rows() != d || p->value.cols() != x.size() + d) {
      fail(ErrorKind::shape, "lstm_step: gate " + p->name + " " +
                                 shape_string(p->value.shape()) + " vs input " +
                                 shape_string(x.shape()) + " state " + shape_string(h.shape()));
    }
  }
  const Var xh_parts[] = {x, h};
  Var xh = concat(xh_parts);
  Var i = sigmoid(affine(xh, g.param(*w.input_w), g.param(*w.input_b)));
  Var f = sigmoid(affine(xh, g.param(*w.forget_w), g.param(*w.forget_b)));
  Var o = sigmoid(affine(xh, g.param(*w.output_w), g.param(*w.output_b)));
  Var cand = tanh(affine(xh, g.param(*w.cell_w), g.param(*w.cell_b)));
  Var c_next = add(mul(f, c), mul(i, cand));
  Var h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

// Plain helpers -----------------------------------------------------------

double logsumexp(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::argument, "logsumexp of empty vector");
  double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  return mx + std::log(z);
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::argument, "softmax of empty vector");
  double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}

// Optimisation ------------------------------------------------------------

void sgd_step(std::span<Parameter* const> params, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    fail(ErrorKind::argument, "sgd_step: learning rate must be finite and non-negative");
  }
  for (Parameter* p : params) {
    if (lr != 0.0) axpy(p->value.data(), p->grad.data(), -lr);
    p->zero_grad();
  }
}

double relative_error(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const LossFn& loss, std::span<Parameter* const> params,
                           double step, double tolerance, std::size_t stride) {
  if (!(step > 0.0)) fail(ErrorKind::argument, "grad_check: step must be positive");
  if (stride == 0) stride = 1;

  auto evaluate = [&loss]() {
    Graph g;
    return loss(g).scalar();
  };

  for (Parameter* p : params) p->zero_grad();
  double base;
  {
    Graph g;
    Var l = loss(g);
    base = l.scalar();
    g.backward(l);
  }
  if (evaluate() != base) {
    fail(ErrorKind::contract, "grad_check: loss function is not deterministic");
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    const Array analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); i += stride) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      const double plus = evaluate();
      p->value[i] = orig - step;
      const double minus = evaluate();
      p->value[i] = orig;
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric);
      ++result.entries_checked;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = err;
        result.worst_param = p->name;
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  result.passed = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace nosm::num
