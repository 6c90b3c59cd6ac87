#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace uamsim::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
};

struct ParamStore {
  std::deque<Param> params;  // stable references across add()

  Param& add(const std::string& name, const Shape& shape);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  void zero_grads();
  std::size_t total_size() const;
};

/// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(Param& p, int fan_in, std::mt19937_64& rng);

/// Node handle within a Tape.
using Var = int;

/// Reverse-mode computation tape. Nodes are recorded in topological order by
/// construction; backward() visits each node exactly once in reverse. Tapes
/// are single-threaded and freshly built per forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var input(const Shape& shape, const std::vector<double>& values);  // constant
  Var param(Param& p);  // gradient flows into p.grad

  // Elementwise and scalar.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var min_ew(Var a, Var b);          // ties follow the first argument
  Var clamp(Var a, double lo, double hi);

  // Linear algebra.
  Var matmul(Var a, Var b);     // (m,k) x (k,n)
  Var matmul_nt(Var a, Var b);  // a x b^T, (m,k) x (n,k)
  Var add_rowvec(Var a, Var row);  // (r,c) + (c) broadcast over rows

  // Shape manipulation.
  Var reshape(Var a, const Shape& shape);
  Var concat(const std::vector<Var>& parts, int axis);
  Var slice(Var a, int axis, int from, int to);
  Var gather_rows(Var a, const std::vector<int>& rows);  // 2-D
  Var broadcast_row_to_hwc(Var row, int h, int w);       // (1,c) -> (h,w,c)

  // Reductions and normalizations.
  Var mean_axis0(Var a);  // (n, rest...) -> (1, rest...)
  Var mean_all(Var a);    // -> (1)
  Var softmax(Var a, int axis = -1);
  /// Softmax along the last axis with a 0/1 key mask: masked entries get zero
  /// weight and are excluded from the denominator; fully masked rows are all
  /// zero.
  Var masked_softmax(Var a, const std::vector<double>& key_mask);
  Var pick(Var a, std::size_t flat_index);  // -> (1)

  /// 2-D convolution, stride 1, same (zero) padding, odd square kernels.
  /// Input (h,w,cin), kernel (k,k,cin,cout) -> (h,w,cout).
  Var conv2d(Var image, Var kernel);

  void backward(Var loss);

  const Shape& shape(Var v) const { return nodes_[v].shape; }
  const std::vector<double>& value(Var v) const { return nodes_[v].value; }
  const std::vector<double>& grad(Var v) const { return nodes_[v].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void()> back;  // may be empty for leaves
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;

  Var make_node(Shape shape, std::vector<double> value, bool requires_grad);
  Node& node(Var v) { return nodes_[v]; }
  void check_finite(Var v, const char* opname) const;

  friend struct TapeOps;
};

/// Adaptive-moment optimizer state; moment shapes mirror the parameter store.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(const ParamStore& store, double lr);
};

/// One bias-corrected update from the gradients currently stored in `store`;
/// gradients are left untouched (callers zero them between batches).
void adam_step(ParamStore& store, AdamState& state);

}  // namespace uamsim::nn
