#ifndef NOSM_NUMKIT_HPP
#define NOSM_NUMKIT_HPP

// Dense 64-bit arrays, a reverse-mode tape, the layer primitives the encoders
// and the translation model are assembled from, SGD and a finite-difference
// gradient checker.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nosm::num {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Row-major dense array of doubles.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array vector(std::initializer_list<double> values);
  static Array vector(std::vector<double> values);
  static Array matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Parameter {
  Parameter(std::string name, Array value);

  std::string name;
  Array value;
  Array grad;

  void zero_grad() { grad.fill(0.0); }
};

/// Owns named parameters at stable addresses, in insertion order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Shape shape);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t entry_count() const;

  void zero_grads();
  std::vector<Array> snapshot() const;
  void restore(const std::vector<Array>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Deterministic generator: std::mt19937_64, whose output sequence is fixed
/// by the standard. Floating-point and bounded draws are derived by hand so
/// results do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) from the top 53 bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), rejection sampled.
  std::size_t below(std::size_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  void fill_uniform(Array& a, double lo, double hi);

 private:
  std::mt19937_64 engine_;
};

// Reverse-mode tape -------------------------------------------------------

class Graph;

/// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double scalar() const;
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  /// Called during backward with the node's output gradient.
  using Backward = std::function<void(Graph&, const Array& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Array value);
  /// Leaf referencing a parameter; its gradient accumulates into p.grad.
  /// Repeated calls for the same parameter return the same node.
  Var param(Parameter& p);
  /// Leaf holding a copy of one row of a matrix parameter.
  Var row(Parameter& p, std::size_t r);
  /// Generic node. `backward` must add into the parents' grad().
  Var custom(Array value, Backward backward);

  const Array& value(Var v) const;
  /// Gradient buffer for a node; only meaningful during backward().
  Array& grad(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse.
  void backward(Var loss);

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    Array grad;
    Parameter* param = nullptr;
    Backward backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

// Primitives --------------------------------------------------------------

Var matvec(Var w, Var x);
Var affine(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var one_minus(Var a);
Var sum(std::span<const Var> terms);
Var concat(std::span<const Var> parts);
Var tanh(Var a);
Var sigmoid(Var a);
/// Elementwise max; ties route the gradient to `a`.
Var maximum(Var a, Var b);
/// Max over all entries, as a 1-element vector.
Var max_reduce(Var a);
/// Row-wise max of a matrix, as a vector of length rows.
Var row_max(Var m);
Var stack_rows(std::span<const Var> rows);
/// Row r of a matrix node, as a vector.
Var pick_row(Var m, std::size_t r);
/// Same data, new shape.
Var reshape(Var a, Shape shape);

Var mlp_tanh(std::span<const Var> inputs, Var w, Var b);

/// log softmax(logits)[index], computed as logit - logsumexp. An `excluded`
/// entry is removed from the support.
Var log_softmax_at(Var logits, std::size_t index,
                   std::ptrdiff_t excluded = -1);

/// Valid 1-D convolution of a unit sequence with a bank of filters.
/// units: [n x E], kernels: [F x k x E], bias: [F]. Returns the pre-activation
/// feature maps [F x (n - k + 1)]; entry (l, j) is the Frobenius product of
/// rows j..j+k-1 with kernel l, plus bias[l].
Var conv_valid(Var units, Var kernels, Var bias);

/// One filter, tanh applied: f(j) = tanh(<U_j, Q> + b).
Var conv_feature_map(Var units, Var kernel, Var bias);

struct LstmWeights {
  Parameter* input_w = nullptr;
  Parameter* input_b = nullptr;
  Parameter* forget_w = nullptr;
  Parameter* forget_b = nullptr;
  Parameter* output_w = nullptr;
  Parameter* output_b = nullptr;
  Parameter* cell_w = nullptr;
  Parameter* cell_b = nullptr;
};

struct LstmState {
  Var h;
  Var c;
};

/// Standard LSTM cell. Gate weights have shape [d x (e + d)] and read
/// concat(x, h).
LstmState lstm_step(const LstmWeights& weights, Var h, Var c, Var x);

// Plain-array helpers -----------------------------------------------------

std::vector<double> softmax(std::span<const double> v);
double logsumexp(std::span<const double> v);

// Optimisation and verification ------------------------------------------

/// value -= lr * grad for every parameter, then zero the grads.
void sgd_step(std::span<Parameter* const> params, double lr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
  bool passed = false;
};

using LossFn = std::function<Var(Graph&)>;

double relative_error(double analytic, double numeric);

/// Compares the tape gradient of `loss` against central differences for every
/// parameter entry (or every `stride`-th entry when stride > 1). Grads of the
/// given parameters are zeroed before and after.
GradCheckResult grad_check(const LossFn& loss, std::span<Parameter* const> params,
                           double step, double tolerance, std::size_t stride = 1);

}  // namespace nosm::num

#endif  // NOSM_NUMKIT_HPP
