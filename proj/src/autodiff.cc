#include "ocoref/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ocoref {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("matrix " + shape() + " given " +
                         std::to_string(values_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(n, 1, std::move(values));
}

bool Matrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Parameter& ParameterSet::add(std::string name, Matrix init) {
  if (index_.contains(name)) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix(init.rows(), init.cols());
  p->value = std::move(init);
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("no parameter '" + std::string(name) + "'");
  }
  return *params_[it->second];
}

const Parameter& ParameterSet::at(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

bool ParameterSet::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kConcatColumns: return "concat_columns";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kLogSumExpRows: return "logsumexp_rows";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLogSigmoid: return "log_sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLog: return "log";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kReshape: return "reshape";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("expected a 1x1 value, got " + v.shape());
  }
  return v[0];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.op = OpKind::kParameter;
  n.param = &p;
  Var v = push(std::move(n));
  bound_.emplace(&p, v.id());
  return v;
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param != nullptr ? n.param->value : n.value;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) {
    throw std::invalid_argument("operands live on different tapes");
  }
  return tape_of(a);
}

void require_same_shape(std::string_view op, const Matrix& a,
                        const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() +
                         " vs " + b.shape());
  }
}

Var unary(OpKind op, Var x, Matrix value, double scalar = 0.0) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.parents = {x.id()};
  n.scalar = scalar;
  return tape_of(x).push(std::move(n));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// C += A * B
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c(i, j) += s;
    }
  }
}

// C += A^T * B
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < n; ++p) {
    const double* brow = b.row(p).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a(p, i);
      if (av == 0.0) continue;
      double* crow = c.row(i).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: shape mismatch " + av.shape() + " vs " +
                         bv.shape());
  }
  Node n;
  n.op = OpKind::kMatmul;
  n.value = Matrix(av.rows(), bv.cols());
  gemm_nn(av, bv, n.value);
  n.parents = {a.id(), b.id()};
  return t.push(std::move(n));
}

namespace {

template <typename F>
Var elementwise(OpKind op, std::string_view name, Var a, Var b, F f) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(name, av, bv);
  Node n;
  n.op = op;
  n.value = Matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = f(av[i], bv[i]);
  n.parents = {a.id(), b.id()};
  return t.push(std::move(n));
}

}  // namespace

Var add(Var a, Var b) {
  return elementwise(OpKind::kAdd, "add", a, b,
                     [](double x, double y) { return x + y; });
}

Var subtract(Var a, Var b) {
  return elementwise(OpKind::kSubtract, "subtract", a, b,
                     [](double x, double y) { return x - y; });
}

Var multiply(Var a, Var b) {
  return elementwise(OpKind::kMultiply, "multiply", a, b,
                     [](double x, double y) { return x * y; });
}

Var concat_columns(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_columns: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  Node n;
  n.op = OpKind::kConcatColumns;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    if (p.rows() != rows) {
      throw DimensionError("concat_columns: shape mismatch " +
                           parts[0].value().shape() + " vs " +
                           p.value().shape());
    }
    n.parents.push_back(p.id());
    n.index.push_back(p.cols());
    cols += p.cols();
  }
  n.value = Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* out = n.value.row(r).data();
    for (const Var& p : parts) {
      const auto src = p.value().row(r);
      out = std::copy(src.begin(), src.end(), out);
    }
  }
  return t.push(std::move(n));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  Node n;
  n.op = OpKind::kConcatRows;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: shape mismatch " +
                           parts[0].value().shape() + " vs " +
                           p.value().shape());
    }
    n.parents.push_back(p.id());
    n.index.push_back(p.rows());
    rows += p.rows();
  }
  n.value = Matrix(rows, cols);
  auto out = n.value.values().begin();
  for (const Var& p : parts) {
    out = std::copy(p.value().values().begin(), p.value().values().end(), out);
  }
  return t.push(std::move(n));
}

Var softmax_rows(Var x) {
  const Matrix& xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto in = xv.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      z += out[j];
    }
    for (double& v : out) v /= z;
  }
  return unary(OpKind::kSoftmaxRows, x, std::move(y));
}

Var logsumexp_rows(Var x) {
  const Matrix& xv = x.value();
  if (xv.cols() == 0) throw DimensionError("logsumexp_rows: no columns");
  Matrix y(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto in = xv.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - mx);
    y(r, 0) = mx + std::log(z);
  }
  return unary(OpKind::kLogSumExpRows, x, std::move(y));
}

Var sigmoid(Var x) {
  Matrix y = x.value();
  for (double& v : y.values()) v = stable_sigmoid(v);
  return unary(OpKind::kSigmoid, x, std::move(y));
}

Var log_sigmoid(Var x) {
  Matrix y = x.value();
  for (double& v : y.values()) {
    v = std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v)));
  }
  return unary(OpKind::kLogSigmoid, x, std::move(y));
}

Var tanh(Var x) {
  Matrix y = x.value();
  for (double& v : y.values()) v = std::tanh(v);
  return unary(OpKind::kTanh, x, std::move(y));
}

Var log(Var x) {
  Matrix y = x.value();
  for (double& v : y.values()) {
    if (!(v > 0.0)) {
      throw NumericError("log of non-positive value " + std::to_string(v));
    }
    v = std::log(v);
  }
  return unary(OpKind::kLog, x, std::move(y));
}

Var scale(Var x, double factor) {
  Matrix y = x.value();
  for (double& v : y.values()) v *= factor;
  return unary(OpKind::kScale, x, std::move(y), factor);
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return unary(OpKind::kSum, x, Matrix(1, 1, s));
}

Var mean(Var x) {
  const Matrix& xv = x.value();
  if (xv.empty()) throw DimensionError("mean of an empty matrix");
  double s = 0.0;
  for (double v : xv.values()) s += v;
  return unary(OpKind::kMean, x,
               Matrix(1, 1, s / static_cast<double>(xv.size())));
}

Var transpose(Var x) {
  const Matrix& xv = x.value();
  Matrix y(xv.cols(), xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < xv.cols(); ++c) y(c, r) = xv(r, c);
  }
  return unary(OpKind::kTranspose, x, std::move(y));
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  const Matrix& xv = x.value();
  Matrix y(rows.size(), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) +
                           " outside " + xv.shape());
    }
    const auto src = xv.row(rows[i]);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  Node n;
  n.op = OpKind::kGatherRows;
  n.value = std::move(y);
  n.parents = {x.id()};
  n.index = std::move(rows);
  return tape_of(x).push(std::move(n));
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  const Matrix& xv = x.value();
  if (rows * cols != xv.size()) {
    throw DimensionError("reshape: shape mismatch " + xv.shape() + " vs " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  return unary(OpKind::kReshape, x, Matrix(rows, cols, xv.values()));
}

Var add_row_bias(Var x, Var bias) {
  if (bias.rows() != 1) {
    throw DimensionError("add_row_bias: bias must be one row, got " +
                         bias.value().shape());
  }
  Var ones = x.tape()->constant(Matrix(x.rows(), 1, 1.0));
  return add(x, matmul(ones, bias));
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) {
    throw std::invalid_argument("backward: loss lives on another tape");
  }
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape());
  }
  std::vector<Matrix> grads(nodes_.size());
  grads[loss.id()] = Matrix(1, 1, 1.0);

  auto grad_of = [&](std::size_t id) -> Matrix& {
    if (grads[id].empty()) {
      const Matrix& v = value(id);
      grads[id] = Matrix(v.rows(), v.cols());
    }
    return grads[id];
  };

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (grads[id].empty()) continue;
    const Node& n = nodes_[id];
    const Matrix& g = grads[id];
    switch (n.op) {
      case OpKind::kConstant:
        break;
      case OpKind::kParameter: {
        Matrix& acc = n.param->grad;
        if (!acc.same_shape(n.param->value)) {
          acc = Matrix(n.param->value.rows(), n.param->value.cols());
        }
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        break;
      }
      case OpKind::kMatmul: {
        const Matrix& a = value(n.parents[0]);
        const Matrix& b = value(n.parents[1]);
        gemm_nt(g, b, grad_of(n.parents[0]));
        gemm_tn(a, g, grad_of(n.parents[1]));
        break;
      }
      case OpKind::kAdd: {
        Matrix& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Matrix& gb = grad_of(n.parents[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        break;
      }
      case OpKind::kSubtract: {
        Matrix& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Matrix& gb = grad_of(n.parents[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        break;
      }
      case OpKind::kMultiply: {
        const Matrix& a = value(n.parents[0]);
        const Matrix& b = value(n.parents[1]);
        Matrix& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        Matrix& gb = grad_of(n.parents[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        break;
      }
      case OpKind::kConcatColumns: {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.parents.size(); ++p) {
          Matrix& gp = grad_of(n.parents[p]);
          const std::size_t w = n.index[p];
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, offset + c);
          }
          offset += w;
        }
        break;
      }
      case OpKind::kConcatRows: {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.parents.size(); ++p) {
          Matrix& gp = grad_of(n.parents[p]);
          const std::size_t count = gp.size();
          for (std::size_t i = 0; i < count; ++i) gp[i] += g[offset + i];
          offset += count;
        }
        break;
      }
      case OpKind::kSoftmaxRows: {
        const Matrix& y = n.value;
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) {
            gx(r, c) += y(r, c) * (g(r, c) - dot);
          }
        }
        break;
      }
      case OpKind::kLogSumExpRows: {
        const Matrix& x = value(n.parents[0]);
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const double lse = n.value(r, 0);
          for (std::size_t c = 0; c < x.cols(); ++c) {
            gx(r, c) += g(r, 0) * std::exp(x(r, c) - lse);
          }
        }
        break;
      }
      case OpKind::kSigmoid: {
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          gx[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case OpKind::kLogSigmoid: {
        const Matrix& x = value(n.parents[0]);
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gx[i] += g[i] * stable_sigmoid(-x[i]);
        }
        break;
      }
      case OpKind::kTanh: {
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          gx[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case OpKind::kLog: {
        const Matrix& x = value(n.parents[0]);
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / x[i];
        break;
      }
      case OpKind::kScale: {
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.scalar;
        break;
      }
      case OpKind::kSum: {
        Matrix& gx = grad_of(n.parents[0]);
        for (double& v : gx.values()) v += g[0];
        break;
      }
      case OpKind::kMean: {
        Matrix& gx = grad_of(n.parents[0]);
        const double share = g[0] / static_cast<double>(gx.size());
        for (double& v : gx.values()) v += share;
        break;
      }
      case OpKind::kTranspose: {
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) gx(c, r) += g(r, c);
        }
        break;
      }
      case OpKind::kGatherRows: {
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < n.index.size(); ++i) {
          auto dst = gx.row(n.index[i]);
          const auto src = g.row(i);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
        break;
      }
      case OpKind::kReshape: {
        Matrix& gx = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        break;
      }
    }
  }
}

}  // namespace ocoref
