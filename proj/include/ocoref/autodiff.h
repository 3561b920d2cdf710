#ifndef OCOREF_AUTODIFF_H_
#define OCOREF_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ocoref {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix column(std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  std::string shape() const;
  void fill(double v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// A named trainable block. `grad` accumulates across backward passes until
// zeroed explicitly.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Insertion-ordered parameter blocks with stable addresses.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::vector<Parameter*> all();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

enum class OpKind {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSubtract,
  kMultiply,
  kConcatColumns,
  kConcatRows,
  kSoftmaxRows,
  kLogSumExpRows,
  kSigmoid,
  kLogSigmoid,
  kTanh,
  kLog,
  kScale,
  kSum,
  kMean,
  kTranspose,
  kGatherRows,
  kReshape,
};

std::string_view op_name(OpKind op);

class Tape;

// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Node {
  OpKind op = OpKind::kConstant;
  Matrix value;                      // unused for parameter leaves
  Parameter* param = nullptr;        // set for parameter leaves
  std::vector<std::size_t> parents;  // node ids; parents precede children
  std::vector<std::size_t> index;    // gather rows / concat widths
  double scalar = 0.0;               // scale factor
};

// Records one forward computation in topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Binding the same parameter twice returns the same leaf.
  Var parameter(Parameter& p);

  const Matrix& value(std::size_t id) const;
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Propagates d(loss)/d(node) for every node and adds the result for each
  // parameter leaf into Parameter::grad. Calling it twice doubles the
  // accumulated gradients.
  void backward(Var loss);

  Var push(Node node);

 private:
  std::vector<Node> nodes_;
  std::map<const Parameter*, std::size_t> bound_;
};

// Forward ops. Shapes must match exactly; a mismatch throws DimensionError
// naming both shapes. Only scale() broadcasts (a scalar).
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var multiply(Var a, Var b);  // elementwise
Var concat_columns(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var softmax_rows(Var x);
Var logsumexp_rows(Var x);  // n x 1
Var sigmoid(Var x);
Var log_sigmoid(Var x);  // log(sigmoid(x)) without underflow
Var tanh(Var x);
Var log(Var x);          // requires x > 0
Var scale(Var x, double factor);
Var sum(Var x);          // 1 x 1
Var mean(Var x);         // 1 x 1
Var transpose(Var x);
Var gather_rows(Var x, std::vector<std::size_t> rows);
Var reshape(Var x, std::size_t rows, std::size_t cols);

// x + ones(rows, 1) * bias, for a 1 x cols bias.
Var add_row_bias(Var x, Var bias);

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_error() const;
  bool passed() const { return max_error() < tolerance; }
};

// Compares backward() against central differences for every entry of every
// listed parameter. The builder must be deterministic and bind the
// parameters it uses on the tape it receives. Relative error is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Throws NumericError on a non-finite loss. Leaves Parameter::grad zeroed.
GradCheckReport grad_check(const std::function<Var(Tape&)>& builder,
                           std::span<Parameter* const> params, double step,
                           double tolerance);

// Checkpoint file: JSON object
//   {"format": "ocoref-params", "version": 1, "meta": {...},
//    "params": [{"name": str, "rows": r, "cols": c, "values": [...]}, ...]}
// Values are row-major and written with round-trip precision.
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string meta_json = "{}";
  std::vector<std::pair<std::string, Matrix>> blocks;
};

std::string serialize_checkpoint(const ParameterSet& params,
                                 const std::string& meta_json);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::string& meta_json);
Checkpoint load_checkpoint(const std::string& path);

// Copies every block of `ckpt` into the same-named parameter. Throws
// CheckpointError on a missing name or a shape mismatch.
void restore_parameters(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace ocoref

#endif  // OCOREF_AUTODIFF_H_
