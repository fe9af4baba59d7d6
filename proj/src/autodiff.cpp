#include "mwsl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mwsl::ad {

namespace {

bool g_fault_injection = false;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                              shape_str(b));
}

enum class Bcast { same, row, col, scalar };

Bcast classify_broadcast(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::col;
  shape_error(op, a, b);
}

Matrix expand(const Matrix& b, Bcast kind, long rows, long cols) {
  switch (kind) {
    case Bcast::same:
      return b;
    case Bcast::scalar:
      return Matrix::Constant(rows, cols, b(0, 0));
    case Bcast::row:
      return b.replicate(rows, 1);
    case Bcast::col:
      return b.replicate(1, cols);
  }
  return b;
}

Matrix reduce_like(const Matrix& g, Bcast kind) {
  switch (kind) {
    case Bcast::same:
      return g;
    case Bcast::scalar: {
      Matrix r(1, 1);
      r(0, 0) = g.sum();
      return r;
    }
    case Bcast::row:
      return g.colwise().sum();
    case Bcast::col:
      return g.rowwise().sum();
  }
  return g;
}

}  // namespace

Value make_op(Op op, Matrix data, std::vector<Value> parents, std::function<void(Node&)> back) {
  auto node = std::make_shared<Node>();
  node->data = std::move(data);
  node->grad = Matrix::Zero(node->data.rows(), node->data.cols());
  node->op = op;
  node->back = std::move(back);
  node->parents.reserve(parents.size());
  for (const auto& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
    node->parents.push_back(p.node());
  }
  return Value(std::move(node));
}

Value Value::leaf(Matrix data) {
  Value v = make_op(Op::leaf, std::move(data), {}, nullptr);
  v.node_->requires_grad = true;
  return v;
}

Value Value::constant(Matrix data) { return make_op(Op::constant, std::move(data), {}, nullptr); }

Value Value::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Value Value::zeros(int rows, int cols) { return constant(Matrix::Zero(rows, cols)); }

double Value::item() const {
  if (rows() != 1 || cols() != 1)
    throw std::invalid_argument("item() on non-scalar value " + shape_str(node_->data));
  return node_->data(0, 0);
}

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.data(), b.data());
  return make_op(Op::matmul, a.data() * b.data(), {a, b}, [](Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.grad.noalias() += n.grad * pb.data.transpose();
    if (pb.requires_grad) pb.grad.noalias() += pa.data.transpose() * n.grad;
  });
}

Value add(const Value& a, const Value& b) {
  Bcast kind = classify_broadcast("add", a.data(), b.data());
  Matrix out = a.data() + expand(b.data(), kind, a.rows(), a.cols());
  return make_op(Op::add, std::move(out), {a, b}, [kind](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad += reduce_like(n.grad, kind);
  });
}

Value sub(const Value& a, const Value& b) {
  Bcast kind = classify_broadcast("sub", a.data(), b.data());
  Matrix out = a.data() - expand(b.data(), kind, a.rows(), a.cols());
  return make_op(Op::sub, std::move(out), {a, b}, [kind](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad -= reduce_like(n.grad, kind);
  });
}

Value mul(const Value& a, const Value& b) {
  Bcast kind = classify_broadcast("mul", a.data(), b.data());
  Matrix bexp = expand(b.data(), kind, a.rows(), a.cols());
  Matrix out = a.data().cwiseProduct(bexp);
  return make_op(Op::mul, std::move(out), {a, b}, [kind, bexp](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad.cwiseProduct(bexp);
    if (n.parents[1]->requires_grad)
      n.parents[1]->grad += reduce_like(n.grad.cwiseProduct(n.parents[0]->data), kind);
  });
}

Value div(const Value& a, const Value& b) {
  if (!((a.rows() == b.rows() && a.cols() == b.cols()) || (b.rows() == 1 && b.cols() == 1)))
    shape_error("div", a.data(), b.data());
  Bcast kind = (b.rows() == a.rows() && b.cols() == a.cols()) ? Bcast::same : Bcast::scalar;
  Matrix bexp = expand(b.data(), kind, a.rows(), a.cols());
  Matrix out = a.data().cwiseQuotient(bexp);
  return make_op(Op::div, std::move(out), {a, b}, [kind, bexp](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad.cwiseQuotient(bexp);
    if (n.parents[1]->requires_grad) {
      Matrix g = -n.grad.cwiseProduct(n.parents[0]->data).cwiseQuotient(bexp.cwiseProduct(bexp));
      n.parents[1]->grad += reduce_like(g, kind);
    }
  });
}

Value scale(const Value& a, double c) {
  return make_op(Op::scale, a.data() * c, {a}, [c](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad * c;
  });
}

Value offset(const Value& a, double c) {
  Matrix out = (a.data().array() + c).matrix();
  return make_op(Op::offset, std::move(out), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  long rows = parts[0].rows();
  long cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].data(), p.data());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  long at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.data();
    at += p.cols();
  }
  return make_op(Op::concat_cols, std::move(out), parts, [](Node& n) {
    long at = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->grad += n.grad.middleCols(at, p->data.cols());
      at += p->data.cols();
    }
  });
}

Value gather_rows(const Value& a, std::vector<int> rows) {
  Matrix out(static_cast<long>(rows.size()), a.cols());
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= a.rows())
      throw std::invalid_argument("gather_rows: index " + std::to_string(rows[k]) +
                                  " out of range for " + shape_str(a.data()));
    out.row(static_cast<long>(k)) = a.data().row(rows[k]);
  }
  return make_op(Op::gather_rows, std::move(out), {a}, [rows = std::move(rows)](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    for (size_t k = 0; k < rows.size(); ++k)
      n.parents[0]->grad.row(rows[k]) += n.grad.row(static_cast<long>(k));
  });
}

Value scatter_mean(const Value& a, std::vector<int> dst, int out_rows) {
  if (static_cast<long>(dst.size()) != a.rows())
    throw std::invalid_argument("scatter_mean: " + std::to_string(dst.size()) +
                                " destinations for " + shape_str(a.data()));
  std::vector<double> count(out_rows, 0.0);
  for (int d : dst) {
    if (d < 0 || d >= out_rows)
      throw std::invalid_argument("scatter_mean: destination " + std::to_string(d) +
                                  " out of range 0.." + std::to_string(out_rows - 1));
    count[d] += 1.0;
  }
  Matrix out = Matrix::Zero(out_rows, a.cols());
  for (size_t p = 0; p < dst.size(); ++p)
    out.row(dst[p]) += a.data().row(static_cast<long>(p)) / count[dst[p]];
  return make_op(Op::scatter_mean, std::move(out), {a},
                 [dst = std::move(dst), count = std::move(count)](Node& n) {
                   if (!n.parents[0]->requires_grad) return;
                   for (size_t p = 0; p < dst.size(); ++p)
                     n.parents[0]->grad.row(static_cast<long>(p)) +=
                         n.grad.row(dst[p]) / count[dst[p]];
                 });
}

Value sum(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  return make_op(Op::sum, std::move(out), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad.array() += n.grad(0, 0);
  });
}

Value mean(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().mean();
  return make_op(Op::mean, std::move(out), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad.array() += n.grad(0, 0) / static_cast<double>(n.parents[0]->data.size());
  });
}

Value square(const Value& a) {
  Matrix out = a.data().array().square().matrix();
  return make_op(Op::square, std::move(out), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad += 2.0 * n.grad.cwiseProduct(n.parents[0]->data);
  });
}

Value log(const Value& a) {
  Matrix out = a.data().array().log().matrix();
  return make_op(Op::log, std::move(out), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad += n.grad.cwiseQuotient(n.parents[0]->data);
  });
}

Value exp(const Value& a) {
  Matrix out = a.data().array().exp().matrix();
  return make_op(Op::exp, out, {a}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad.cwiseProduct(n.data);
  });
}

Value sigmoid(const Value& a) {
  Matrix out = (1.0 / (1.0 + (-a.data().array()).exp())).matrix();
  return make_op(Op::sigmoid, std::move(out), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad) {
      Matrix s = n.data;
      n.parents[0]->grad += n.grad.cwiseProduct(s.cwiseProduct(Matrix::Ones(s.rows(), s.cols()) - s));
    }
  });
}

Value tanh(const Value& a) {
  Matrix out = a.data().array().tanh().matrix();
  return make_op(Op::tanh, std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Matrix d = (1.0 - n.data.array().square()).matrix();
    if (g_fault_injection) d = (1.0 + n.data.array().square()).matrix();  // harness hook
    n.parents[0]->grad += n.grad.cwiseProduct(d);
  });
}

Value relu(const Value& a) {
  return make_op(Op::relu, a.data().cwiseMax(0.0), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Matrix mask = (n.parents[0]->data.array() > 0.0).cast<double>().matrix();
    n.parents[0]->grad += n.grad.cwiseProduct(mask);
  });
}

Value softplus(const Value& a) {
  // stable log(1 + e^x)
  Matrix out = a.data().unaryExpr([](double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
  });
  return make_op(Op::softplus, std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Matrix s = n.parents[0]->data.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    n.parents[0]->grad += n.grad.cwiseProduct(s);
  });
}

Value softmax_rows(const Value& a) {
  Matrix out(a.rows(), a.cols());
  for (long r = 0; r < a.rows(); ++r) {
    double mx = a.data().row(r).maxCoeff();
    Eigen::ArrayXd e = (a.data().row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return make_op(Op::softmax_rows, std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    for (long r = 0; r < n.data.rows(); ++r) {
      const double dot = n.grad.row(r).dot(n.data.row(r));
      Eigen::RowVectorXd shifted =
          n.grad.row(r) - Eigen::RowVectorXd::Constant(n.data.cols(), dot);
      n.parents[0]->grad.row(r) += n.data.row(r).cwiseProduct(shifted);
    }
  });
}

Value segment_log_softmax(const Value& a, std::vector<int> offsets) {
  if (a.cols() != 1) throw std::invalid_argument("segment_log_softmax: input must be a column");
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != a.rows())
    throw std::invalid_argument("segment_log_softmax: offsets must span 0..rows");
  Matrix out(a.rows(), 1);
  for (size_t s = 0; s + 1 < offsets.size(); ++s) {
    int lo = offsets[s], hi = offsets[s + 1];
    if (hi < lo) throw std::invalid_argument("segment_log_softmax: offsets not ascending");
    if (hi == lo) continue;
    double mx = a.data().col(0).segment(lo, hi - lo).maxCoeff();
    double lse = std::log((a.data().col(0).segment(lo, hi - lo).array() - mx).exp().sum()) + mx;
    out.col(0).segment(lo, hi - lo) = a.data().col(0).segment(lo, hi - lo).array() - lse;
  }
  return make_op(Op::segment_log_softmax, std::move(out), {a},
                 [offsets = std::move(offsets)](Node& n) {
                   if (!n.parents[0]->requires_grad) return;
                   for (size_t s = 0; s + 1 < offsets.size(); ++s) {
                     int lo = offsets[s], hi = offsets[s + 1];
                     if (hi == lo) continue;
                     double gsum = n.grad.col(0).segment(lo, hi - lo).sum();
                     Eigen::ArrayXd p = n.data.col(0).segment(lo, hi - lo).array().exp();
                     n.parents[0]->grad.col(0).segment(lo, hi - lo) +=
                         (n.grad.col(0).segment(lo, hi - lo).array() - p * gsum).matrix();
                   }
                 });
}

Value transpose(const Value& a) {
  return make_op(Op::transpose, a.data().transpose(), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad.transpose();
  });
}

void backward(const Value& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined value");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " +
                                std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));

  // iterative post-order; reversed it is a valid topological order
  std::vector<Node*> order;
  std::set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
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

  loss.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->back) (*it)->back(**it);
}

double min_relu_input_gap(const Value& root) {
  double gap = std::numeric_limits<double>::infinity();
  std::set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (n->op == Op::relu && n->parents[0]->data.size() > 0)
      gap = std::min(gap, n->parents[0]->data.array().abs().minCoeff());
    for (auto& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  return gap;
}

// --- ParamStore -------------------------------------------------------------

Value& ParamStore::add(const std::string& name, Matrix init) {
  if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
  names_.push_back(name);
  m_[name] = Matrix::Zero(init.rows(), init.cols());
  v_[name] = Matrix::Zero(init.rows(), init.cols());
  auto [it, ok] = params_.emplace(name, Value::leaf(std::move(init)));
  (void)ok;
  return it->second;
}

Value& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

const Value& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const { return params_.count(name) > 0; }

void ParamStore::zero_grads() {
  for (auto& [name, v] : params_) v.grad().setZero();
}

Matrix& ParamStore::moment_m(const std::string& name) { return m_.at(name); }
Matrix& ParamStore::moment_v(const std::string& name) { return v_.at(name); }
const Matrix& ParamStore::moment_m(const std::string& name) const { return m_.at(name); }
const Matrix& ParamStore::moment_v(const std::string& name) const { return v_.at(name); }

void adam_step(ParamStore& store, double lr, std::pair<double, double> betas, double eps) {
  const auto [b1, b2] = betas;
  const long t = store.step_ + 1;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (const auto& name : store.names_) {
    Value& p = store.params_.at(name);
    const Matrix& g = p.grad();
    if (!g.allFinite())
      throw std::runtime_error("adam_step: non-finite gradient for parameter " + name);
    Matrix& m = store.m_.at(name);
    Matrix& v = store.v_.at(name);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    Matrix mhat = m / corr1;
    Matrix vhat = v / corr2;
    Matrix denom = vhat.cwiseSqrt() + Matrix::Constant(vhat.rows(), vhat.cols(), eps);
    p.data() -= lr * mhat.cwiseQuotient(denom);
  }
  store.step_ = t;
}

// --- gradient check ---------------------------------------------------------

GradCheckResult grad_check(ParamStore& store, const std::function<Value(ParamStore&)>& build,
                           double eps, int min_entries, std::uint64_t seed) {
  store.zero_grads();
  Value nominal = build(store);
  if (nominal.rows() != 1 || nominal.cols() != 1)
    throw std::invalid_argument("grad_check: builder must return a 1x1 loss");
  if (!std::isfinite(nominal.item())) throw std::runtime_error("grad_check: non-finite loss");
  const double nominal_gap = min_relu_input_gap(nominal);
  backward(nominal);

  std::map<std::string, Matrix> analytic;
  for (const auto& name : store.names()) analytic[name] = store.at(name).grad();

  struct Entry {
    std::string name;
    long r, c;
  };
  std::vector<Entry> entries;
  for (const auto& name : store.names()) {
    const Matrix& d = store.at(name).data();
    for (long r = 0; r < d.rows(); ++r)
      for (long c = 0; c < d.cols(); ++c) entries.push_back({name, r, c});
  }
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  std::shuffle(entries.begin(), entries.end(), rng);

  GradCheckResult res;
  for (const auto& e : entries) {
    if (res.entries_checked >= min_entries) break;
    Matrix& d = store.at(e.name).data();
    const double orig = d(e.r, e.c);

    d(e.r, e.c) = orig + eps;
    Value lp = build(store);
    const double plus = lp.item();
    const double gap_plus = min_relu_input_gap(lp);

    d(e.r, e.c) = orig - eps;
    Value lm = build(store);
    const double minus = lm.item();
    const double gap_minus = min_relu_input_gap(lm);

    d(e.r, e.c) = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw std::runtime_error("grad_check: non-finite perturbed loss at parameter " + e.name);

    if (std::min({nominal_gap, gap_plus, gap_minus}) < 1e-6) {
      ++res.entries_skipped;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic.at(e.name)(e.r, e.c);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.entries_checked;
  }
  return res;
}

void set_gradient_fault_injection(bool enabled) { g_fault_injection = enabled; }

// --- checkpoint container ---------------------------------------------------

namespace {

void append_tensor(std::vector<double>& payload, nlohmann::json& index, const std::string& name,
                   const Matrix& m) {
  nlohmann::json t;
  t["name"] = name;
  t["rows"] = m.rows();
  t["cols"] = m.cols();
  t["offset"] = payload.size() * sizeof(double);
  index.push_back(t);
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) payload.push_back(m(r, c));
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
  nlohmann::json index;
  index["format"] = "mwsl-ckpt-1";
  index["step"] = store.step();
  index["tensors"] = nlohmann::json::array();
  std::vector<double> payload;
  for (const auto& name : store.names())
    append_tensor(payload, index["tensors"], name, store.at(name).data());
  for (const auto& name : store.names())
    append_tensor(payload, index["tensors"], "adam.m:" + name, store.moment_m(name));
  for (const auto& name : store.names())
    append_tensor(payload, index["tensors"], "adam.v:" + name, store.moment_v(name));

  const std::string header = index.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  const std::uint64_t len = header.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
}

void load_checkpoint(ParamStore& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char lenbuf[8];
  if (!in.read(lenbuf, 8)) throw std::runtime_error("checkpoint truncated: " + path);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len)))
    throw std::runtime_error("checkpoint index truncated: " + path);
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint index parse failed: ") + e.what());
  }
  std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto read_matrix = [&](const nlohmann::json& t) {
    const long rows = t.at("rows").get<long>();
    const long cols = t.at("cols").get<long>();
    const size_t offset = t.at("offset").get<size_t>();
    if (offset + static_cast<size_t>(rows * cols) * sizeof(double) > rest.size())
      throw std::runtime_error("checkpoint payload truncated: " + path);
    Matrix m(rows, cols);
    const char* src = rest.data() + offset;
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) {
        double v;
        std::memcpy(&v, src, sizeof(double));
        src += sizeof(double);
        m(r, c) = v;
      }
    return m;
  };

  for (const auto& t : index.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    Matrix m = read_matrix(t);
    if (name.rfind("adam.m:", 0) == 0) {
      store.moment_m(name.substr(7)) = std::move(m);
    } else if (name.rfind("adam.v:", 0) == 0) {
      store.moment_v(name.substr(7)) = std::move(m);
    } else if (store.contains(name)) {
      Value& p = store.at(name);
      if (p.rows() != m.rows() || p.cols() != m.cols())
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      p.data() = std::move(m);
    } else {
      store.add(name, std::move(m));
    }
  }
  store.set_step(index.at("step").get<long>());
}

}  // namespace mwsl::ad
