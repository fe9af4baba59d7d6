#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mwsl::ad {

using Matrix = Eigen::MatrixXd;

enum class Op {
  leaf,
  constant,
  matmul,
  add,
  sub,
  mul,
  div,
  scale,
  offset,
  concat_cols,
  gather_rows,
  scatter_mean,
  sum,
  mean,
  square,
  log,
  exp,
  sigmoid,
  tanh,
  relu,
  softplus,
  softmax_rows,
  segment_log_softmax,
  transpose,
};

struct Node {
  Matrix data;
  Matrix grad;
  Op op = Op::leaf;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> back;
};

// Handle onto a node of the computation DAG. Copying a Value shares the node.
// Parameter leaves live in a ParamStore and persist across graphs; everything
// else is freed when the last handle to a graph goes away.
class Value {
 public:
  Value() = default;

  static Value leaf(Matrix data);
  static Value constant(Matrix data);
  static Value scalar(double v);  // 1x1 constant
  static Value zeros(int rows, int cols);

  bool defined() const { return node_ != nullptr; }
  const Matrix& data() const { return node_->data; }
  Matrix& data() { return node_->data; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad() { return node_->grad; }
  long rows() const { return node_->data.rows(); }
  long cols() const { return node_->data.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;  // value of a 1x1

  std::shared_ptr<Node> node() const { return node_; }

 private:
  explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Value make_op(Op op, Matrix data, std::vector<Value> parents,
                       std::function<void(Node&)> back);
  std::shared_ptr<Node> node_;
};

// --- operator suite -------------------------------------------------------

Value matmul(const Value& a, const Value& b);
// add/sub/mul support b of the same shape, a row (1 x C), a column (R x 1) or
// a scalar (1 x 1) broadcast against a.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
// div requires b of the same shape as a, or a 1x1 scalar.
Value div(const Value& a, const Value& b);
Value scale(const Value& a, double c);
Value offset(const Value& a, double c);
Value concat_cols(const std::vector<Value>& parts);
Value gather_rows(const Value& a, std::vector<int> rows);
// out[r] = mean of a's rows p with dst[p] == r; rows of `a` not mapped to any
// destination are ignored, destinations with no sources stay zero.
Value scatter_mean(const Value& a, std::vector<int> dst, int out_rows);
Value sum(const Value& a);
Value mean(const Value& a);
Value square(const Value& a);
Value log(const Value& a);
Value exp(const Value& a);
Value sigmoid(const Value& a);
Value tanh(const Value& a);
Value relu(const Value& a);
Value softplus(const Value& a);
Value softmax_rows(const Value& a);
// a is a column (n x 1); rows [offsets[s], offsets[s+1]) form one softmax
// group. Returns log-softmax within each group.
Value segment_log_softmax(const Value& a, std::vector<int> offsets);
Value transpose(const Value& a);

// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every reachable
// node. Grads add up across calls until zeroed. Throws if loss is not 1x1.
void backward(const Value& loss);

// Minimum |input| over all relu applications reachable from root; +inf when
// the graph contains none. Drives the finite-difference kink guard.
double min_relu_input_gap(const Value& root);

// --- parameters and optimizer ---------------------------------------------

class ParamStore {
 public:
  Value& add(const std::string& name, Matrix init);
  Value& at(const std::string& name);
  const Value& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  size_t size() const { return names_.size(); }

  void zero_grads();

  // Adam state, exposed for checkpointing.
  Matrix& moment_m(const std::string& name);
  Matrix& moment_v(const std::string& name);
  const Matrix& moment_m(const std::string& name) const;
  const Matrix& moment_v(const std::string& name) const;
  long step() const { return step_; }
  void set_step(long s) { step_ = s; }

  friend void adam_step(ParamStore& store, double lr, std::pair<double, double> betas,
                        double eps);

 private:
  std::vector<std::string> names_;
  std::map<std::string, Value> params_;
  std::map<std::string, Matrix> m_, v_;
  long step_ = 0;
};

// Bias-corrected Adam update in place. Grads are left untouched; zeroing is a
// separate call. Throws on non-finite gradients, naming the parameter.
void adam_step(ParamStore& store, double lr, std::pair<double, double> betas = {0.9, 0.999},
               double eps = 1e-8);

// --- gradient checking ------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  int entries_checked = 0;
  int entries_skipped = 0;  // excluded by the relu kink guard
};

// Compares analytic gradients against central finite differences over a
// seeded sample of at least min_entries parameter entries (or all of them).
// Entries whose nominal or perturbed forward passes put a relu input within
// 1e-6 of its kink are excluded. Throws on a non-finite loss.
GradCheckResult grad_check(ParamStore& store, const std::function<Value(ParamStore&)>& build,
                           double eps = 1e-5, int min_entries = 200, std::uint64_t seed = 0);

// Test-harness hook: deliberately corrupts the tanh backward rule so the
// verification suite can prove the gradient oracle catches bad rules.
void set_gradient_fault_injection(bool enabled);

// --- checkpoint container ---------------------------------------------------
// Layout: u64 little-endian JSON index length, the JSON index, then row-major
// little-endian f64 payloads. The index lists {name, rows, cols, offset} per
// tensor plus {"step": N}; Adam moments are stored as "adam.m:<name>" and
// "adam.v:<name>" tensors.

void save_checkpoint(const ParamStore& store, const std::string& path);
void load_checkpoint(ParamStore& store, const std::string& path);

}  // namespace mwsl::ad
