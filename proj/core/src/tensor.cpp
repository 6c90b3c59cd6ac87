#include "uamsim/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uamsim/errors.hpp"

namespace uamsim::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Param& ParamStore::add(const std::string& name, const Shape& shape) {
  Param p;
  p.name = name;
  p.shape = shape;
  p.value.assign(numel(shape), 0.0);
  p.grad.assign(numel(shape), 0.0);
  params.push_back(std::move(p));
  return params.back();
}

Param* ParamStore::find(const std::string& name) {
  for (Param& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const Param& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grads() {
  for (Param& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const Param& p : params) n += p.value.size();
  return n;
}

void init_uniform_fan_in(Param& p, int fan_in, std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.value) v = dist(rng);
}

namespace {

struct AxisView {
  std::size_t outer, len, inner;
};

AxisView axis_view(const Shape& shape, int axis) {
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[i]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= static_cast<std::size_t>(shape[i]);
  return {outer, static_cast<std::size_t>(shape[axis]), inner};
}

int normalize_axis(const Shape& shape, int axis, const char* opname) {
  int nd = static_cast<int>(shape.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) {
    throw ShapeError(std::string(opname) + ": axis out of range for " + shape_str(shape));
  }
  return axis;
}

}  // namespace

Var Tape::make_node(Shape shape, std::vector<double> value, bool requires_grad) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

void Tape::check_finite(Var v, const char* opname) const {
  for (double x : nodes_[v].value) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by ") + opname);
    }
  }
}

Var Tape::input(const Shape& shape, const std::vector<double>& values) {
  if (values.size() != numel(shape)) {
    throw ShapeError("input: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape));
  }
  return make_node(shape, values, false);
}

Var Tape::param(Param& p) {
  Var v = make_node(p.shape, p.value, true);
  Param* pp = &p;
  Tape* t = this;
  node(v).back = [t, v, pp]() {
    const std::vector<double>& g = t->node(v).grad;
    for (std::size_t i = 0; i < g.size(); ++i) pp->grad[i] += g[i];
  };
  return v;
}

Var Tape::add(Var a, Var b) {
  if (node(a).shape != node(b).shape) {
    throw ShapeError("add: shape mismatch " + shape_str(node(a).shape) + " vs " +
                     shape_str(node(b).shape));
  }
  std::vector<double> out = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad || node(b).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, b]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    auto& gb = t->node(b).grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  };
  return v;
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::mul(Var a, Var b) {
  if (node(a).shape != node(b).shape) {
    throw ShapeError("mul: shape mismatch " + shape_str(node(a).shape) + " vs " +
                     shape_str(node(b).shape));
  }
  std::vector<double> out = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad || node(b).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, b]() {
    const auto& g = t->node(v).grad;
    const auto& av = t->node(a).value;
    const auto& bv2 = t->node(b).value;
    auto& ga = t->node(a).grad;
    auto& gb = t->node(b).grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv2[i];
      gb[i] += g[i] * av[i];
    }
  };
  return v;
}

Var Tape::scale(Var a, double c) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x *= c;
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, c]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  };
  return v;
}

Var Tape::add_const(Var a, double c) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x += c;
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return v;
}

Var Tape::relu(Var a) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x = x > 0 ? x : 0.0;
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    const auto& av = t->node(a).value;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += av[i] > 0 ? g[i] : 0.0;
  };
  return v;
}

Var Tape::sigmoid(Var a) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x = 1.0 / (1.0 + std::exp(-x));
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    const auto& yv = t->node(v).value;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i] * (1.0 - yv[i]);
  };
  return v;
}

Var Tape::tanh_(Var a) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x = std::tanh(x);
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    const auto& yv = t->node(v).value;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - yv[i] * yv[i]);
  };
  return v;
}

Var Tape::exp_(Var a) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x = std::exp(x);
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  check_finite(v, "exp");
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    const auto& yv = t->node(v).value;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
  };
  return v;
}

Var Tape::log_(Var a) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x = std::log(x);
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  check_finite(v, "log");
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    const auto& av = t->node(a).value;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
  };
  return v;
}

Var Tape::min_ew(Var a, Var b) {
  if (node(a).shape != node(b).shape) {
    throw ShapeError("min_ew: shape mismatch " + shape_str(node(a).shape) + " vs " +
                     shape_str(node(b).shape));
  }
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] <= bv[i] ? av[i] : bv[i];
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad || node(b).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, b]() {
    const auto& g = t->node(v).grad;
    const auto& av2 = t->node(a).value;
    const auto& bv2 = t->node(b).value;
    auto& ga = t->node(a).grad;
    auto& gb = t->node(b).grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av2[i] <= bv2[i]) {
        ga[i] += g[i];
      } else {
        gb[i] += g[i];
      }
    }
  };
  return v;
}

Var Tape::clamp(Var a, double lo, double hi) {
  std::vector<double> out = node(a).value;
  for (double& x : out) x = std::clamp(x, lo, hi);
  Var v = make_node(node(a).shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, lo, hi]() {
    const auto& g = t->node(v).grad;
    const auto& av = t->node(a).value;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av[i] >= lo && av[i] <= hi) ga[i] += g[i];
    }
  };
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
  }
  int m = sa[0], k = sa[1], n = sb[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double aip = av[static_cast<std::size_t>(i) * k + p];
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        out[static_cast<std::size_t>(i) * n + j] += aip * bv[static_cast<std::size_t>(p) * n + j];
      }
    }
  }
  Var v = make_node({m, n}, std::move(out), node(a).requires_grad || node(b).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, b, m, k, n]() {
    const auto& g = t->node(v).grad;
    const auto& av2 = t->node(a).value;
    const auto& bv2 = t->node(b).value;
    auto& ga = t->node(a).grad;
    auto& gb = t->node(b).grad;
    // dA = dC * B^T
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double gij = g[static_cast<std::size_t>(i) * n + j];
        if (gij == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          ga[static_cast<std::size_t>(i) * k + p] += gij * bv2[static_cast<std::size_t>(p) * n + j];
        }
      }
    }
    // dB = A^T * dC
    for (int p = 0; p < k; ++p) {
      for (int i = 0; i < m; ++i) {
        double aip = av2[static_cast<std::size_t>(i) * k + p];
        if (aip == 0.0) continue;
        for (int j = 0; j < n; ++j) {
          gb[static_cast<std::size_t>(p) * n + j] += aip * g[static_cast<std::size_t>(i) * n + j];
        }
      }
    }
  };
  return v;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) {
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb) +
                     "^T");
  }
  int m = sa[0], k = sa[1], n = sb[0];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        acc += av[static_cast<std::size_t>(i) * k + p] * bv[static_cast<std::size_t>(j) * k + p];
      }
      out[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
  Var v = make_node({m, n}, std::move(out), node(a).requires_grad || node(b).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, b, m, k, n]() {
    const auto& g = t->node(v).grad;
    const auto& av2 = t->node(a).value;
    const auto& bv2 = t->node(b).value;
    auto& ga = t->node(a).grad;
    auto& gb = t->node(b).grad;
    // C = A B^T: dA = dC * B ; dB = dC^T * A
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double gij = g[static_cast<std::size_t>(i) * n + j];
        if (gij == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          ga[static_cast<std::size_t>(i) * k + p] += gij * bv2[static_cast<std::size_t>(j) * k + p];
          gb[static_cast<std::size_t>(j) * k + p] += gij * av2[static_cast<std::size_t>(i) * k + p];
        }
      }
    }
  };
  return v;
}

Var Tape::add_rowvec(Var a, Var row) {
  const Shape& sa = node(a).shape;
  const Shape& sr = node(row).shape;
  std::size_t cols = numel(sr);
  if (sa.empty() || numel(sa) % cols != 0 ||
      static_cast<std::size_t>(sa.back()) != cols) {
    throw ShapeError("add_rowvec: " + shape_str(sa) + " vs row " + shape_str(sr));
  }
  std::vector<double> out = node(a).value;
  const auto& rv = node(row).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rv[i % cols];
  Var v = make_node(sa, std::move(out), node(a).requires_grad || node(row).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, row, cols]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    auto& gr = t->node(row).grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gr[i % cols] += g[i];
    }
  };
  return v;
}

Var Tape::reshape(Var a, const Shape& shape) {
  if (numel(shape) != numel(node(a).shape)) {
    throw ShapeError("reshape: cannot view " + shape_str(node(a).shape) + " as " +
                     shape_str(shape));
  }
  Var v = make_node(shape, node(a).value, node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return v;
}

Var Tape::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape out_shape = node(parts[0]).shape;
  int ax = normalize_axis(out_shape, axis, "concat");
  int total = 0;
  bool rg = false;
  for (Var p : parts) {
    const Shape& s = node(p).shape;
    if (s.size() != out_shape.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(s) + " vs " + shape_str(out_shape));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != ax && s[i] != out_shape[i]) {
        throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(out_shape));
      }
    }
    total += s[ax];
    rg = rg || node(p).requires_grad;
  }
  out_shape[ax] = total;
  AxisView view = axis_view(out_shape, ax);
  std::vector<double> out(numel(out_shape));
  std::size_t offset = 0;
  for (Var p : parts) {
    std::size_t len = static_cast<std::size_t>(node(p).shape[ax]);
    const auto& pv = node(p).value;
    for (std::size_t o = 0; o < view.outer; ++o) {
      for (std::size_t k = 0; k < len; ++k) {
        for (std::size_t i = 0; i < view.inner; ++i) {
          out[(o * view.len + offset + k) * view.inner + i] = pv[(o * len + k) * view.inner + i];
        }
      }
    }
    offset += len;
  }
  Var v = make_node(out_shape, std::move(out), rg);
  Tape* t = this;
  std::vector<Var> parts_copy = parts;
  std::vector<std::size_t> lens;
  for (Var p : parts) lens.push_back(static_cast<std::size_t>(node(p).shape[ax]));
  node(v).back = [t, v, parts_copy, lens, view]() {
    const auto& g = t->node(v).grad;
    std::size_t offset2 = 0;
    for (std::size_t pi = 0; pi < parts_copy.size(); ++pi) {
      auto& gp = t->node(parts_copy[pi]).grad;
      std::size_t len = lens[pi];
      for (std::size_t o = 0; o < view.outer; ++o) {
        for (std::size_t k = 0; k < len; ++k) {
          for (std::size_t i = 0; i < view.inner; ++i) {
            gp[(o * len + k) * view.inner + i] += g[(o * view.len + offset2 + k) * view.inner + i];
          }
        }
      }
      offset2 += len;
    }
  };
  return v;
}

Var Tape::slice(Var a, int axis, int from, int to) {
  const Shape& sa = node(a).shape;
  int ax = normalize_axis(sa, axis, "slice");
  if (from < 0 || to > sa[ax] || from >= to) {
    throw ShapeError("slice: range [" + std::to_string(from) + "," + std::to_string(to) +
                     ") invalid for " + shape_str(sa));
  }
  Shape out_shape = sa;
  out_shape[ax] = to - from;
  AxisView view = axis_view(sa, ax);
  std::size_t len_out = static_cast<std::size_t>(to - from);
  std::vector<double> out(numel(out_shape));
  const auto& av = node(a).value;
  for (std::size_t o = 0; o < view.outer; ++o) {
    for (std::size_t k = 0; k < len_out; ++k) {
      for (std::size_t i = 0; i < view.inner; ++i) {
        out[(o * len_out + k) * view.inner + i] = av[(o * view.len + from + k) * view.inner + i];
      }
    }
  }
  Var v = make_node(out_shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, view, from, len_out]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    for (std::size_t o = 0; o < view.outer; ++o) {
      for (std::size_t k = 0; k < len_out; ++k) {
        for (std::size_t i = 0; i < view.inner; ++i) {
          ga[(o * view.len + from + k) * view.inner + i] += g[(o * len_out + k) * view.inner + i];
        }
      }
    }
  };
  return v;
}

Var Tape::gather_rows(Var a, const std::vector<int>& rows) {
  const Shape& sa = node(a).shape;
  if (sa.size() != 2) throw ShapeError("gather_rows: expected 2-D input, got " + shape_str(sa));
  int cols = sa[1];
  std::vector<double> out(rows.size() * static_cast<std::size_t>(cols));
  const auto& av = node(a).value;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= sa[0]) throw ShapeError("gather_rows: row index out of range");
    for (int c = 0; c < cols; ++c) {
      out[r * cols + c] = av[static_cast<std::size_t>(rows[r]) * cols + c];
    }
  }
  Var v = make_node({static_cast<int>(rows.size()), cols}, std::move(out), node(a).requires_grad);
  Tape* t = this;
  std::vector<int> rows_copy = rows;
  node(v).back = [t, v, a, rows_copy, cols]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    for (std::size_t r = 0; r < rows_copy.size(); ++r) {
      for (int c = 0; c < cols; ++c) {
        ga[static_cast<std::size_t>(rows_copy[r]) * cols + c] += g[r * cols + c];
      }
    }
  };
  return v;
}

Var Tape::broadcast_row_to_hwc(Var row, int h, int w) {
  std::size_t c = numel(node(row).shape);
  std::vector<double> out(static_cast<std::size_t>(h) * w * c);
  const auto& rv = node(row).value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rv[i % c];
  Var v = make_node({h, w, static_cast<int>(c)}, std::move(out), node(row).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, row, c]() {
    const auto& g = t->node(v).grad;
    auto& gr = t->node(row).grad;
    for (std::size_t i = 0; i < g.size(); ++i) gr[i % c] += g[i];
  };
  return v;
}

Var Tape::mean_axis0(Var a) {
  const Shape& sa = node(a).shape;
  if (sa.empty()) throw ShapeError("mean_axis0: scalar input");
  int n = sa[0];
  std::size_t rest = numel(sa) / static_cast<std::size_t>(n);
  Shape out_shape = sa;
  out_shape[0] = 1;
  std::vector<double> out(rest, 0.0);
  const auto& av = node(a).value;
  for (int r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < rest; ++i) out[i] += av[static_cast<std::size_t>(r) * rest + i];
  }
  for (double& x : out) x /= n;
  Var v = make_node(out_shape, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, n, rest]() {
    const auto& g = t->node(v).grad;
    auto& ga = t->node(a).grad;
    for (int r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < rest; ++i) ga[static_cast<std::size_t>(r) * rest + i] += g[i] / n;
    }
  };
  return v;
}

Var Tape::mean_all(Var a) {
  std::size_t n = numel(node(a).shape);
  double acc = 0.0;
  for (double x : node(a).value) acc += x;
  Var v = make_node({1}, {acc / static_cast<double>(n)}, node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, n]() {
    double g = t->node(v).grad[0] / static_cast<double>(n);
    auto& ga = t->node(a).grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  };
  return v;
}

Var Tape::softmax(Var a, int axis) {
  const Shape& sa = node(a).shape;
  int ax = normalize_axis(sa, axis, "softmax");
  AxisView view = axis_view(sa, ax);
  std::vector<double> out(numel(sa));
  const auto& av = node(a).value;
  for (std::size_t o = 0; o < view.outer; ++o) {
    for (std::size_t i = 0; i < view.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < view.len; ++k) {
        mx = std::max(mx, av[(o * view.len + k) * view.inner + i]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < view.len; ++k) {
        double e = std::exp(av[(o * view.len + k) * view.inner + i] - mx);
        out[(o * view.len + k) * view.inner + i] = e;
        sum += e;
      }
      for (std::size_t k = 0; k < view.len; ++k) {
        out[(o * view.len + k) * view.inner + i] /= sum;
      }
    }
  }
  Var v = make_node(sa, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, view]() {
    const auto& g = t->node(v).grad;
    const auto& yv = t->node(v).value;
    auto& ga = t->node(a).grad;
    for (std::size_t o = 0; o < view.outer; ++o) {
      for (std::size_t i = 0; i < view.inner; ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < view.len; ++k) {
          std::size_t idx = (o * view.len + k) * view.inner + i;
          dot += g[idx] * yv[idx];
        }
        for (std::size_t k = 0; k < view.len; ++k) {
          std::size_t idx = (o * view.len + k) * view.inner + i;
          ga[idx] += yv[idx] * (g[idx] - dot);
        }
      }
    }
  };
  return v;
}

Var Tape::masked_softmax(Var a, const std::vector<double>& key_mask) {
  const Shape& sa = node(a).shape;
  if (sa.empty() || static_cast<std::size_t>(sa.back()) != key_mask.size()) {
    throw ShapeError("masked_softmax: mask size " + std::to_string(key_mask.size()) +
                     " does not match last axis of " + shape_str(sa));
  }
  std::size_t len = key_mask.size();
  std::size_t rows = numel(sa) / len;
  std::vector<double> out(numel(sa), 0.0);
  const auto& av = node(a).value;
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) {
      if (key_mask[k] > 0) mx = std::max(mx, av[r * len + k]);
    }
    if (!std::isfinite(mx)) continue;  // fully masked row stays zero
    double sum = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      if (key_mask[k] > 0) {
        double e = std::exp(av[r * len + k] - mx);
        out[r * len + k] = e;
        sum += e;
      }
    }
    for (std::size_t k = 0; k < len; ++k) out[r * len + k] /= sum;
  }
  Var v = make_node(sa, std::move(out), node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, len, rows]() {
    const auto& g = t->node(v).grad;
    const auto& yv = t->node(v).value;
    auto& ga = t->node(a).grad;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += g[r * len + k] * yv[r * len + k];
      for (std::size_t k = 0; k < len; ++k) {
        ga[r * len + k] += yv[r * len + k] * (g[r * len + k] - dot);
      }
    }
  };
  return v;
}

Var Tape::pick(Var a, std::size_t flat_index) {
  if (flat_index >= numel(node(a).shape)) throw ShapeError("pick: index out of range");
  Var v = make_node({1}, {node(a).value[flat_index]}, node(a).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, a, flat_index]() { t->node(a).grad[flat_index] += t->node(v).grad[0]; };
  return v;
}

Var Tape::conv2d(Var image, Var kernel) {
  const Shape& si = node(image).shape;
  const Shape& sk = node(kernel).shape;
  if (si.size() != 3 || sk.size() != 4 || sk[0] != sk[1] || sk[0] % 2 == 0 || sk[2] != si[2]) {
    throw ShapeError("conv2d: image " + shape_str(si) + " kernel " + shape_str(sk) +
                     " (want (h,w,cin) and odd (k,k,cin,cout))");
  }
  int h = si[0], w = si[1], cin = si[2], ksz = sk[0], cout = sk[3];
  int pad = ksz / 2;
  std::vector<double> out(static_cast<std::size_t>(h) * w * cout, 0.0);
  const auto& iv = node(image).value;
  const auto& kv = node(kernel).value;
  auto iidx = [w, cin](int i, int j, int c) {
    return (static_cast<std::size_t>(i) * w + j) * cin + c;
  };
  auto kidx = [ksz, cin, cout](int di, int dj, int ci, int co) {
    return ((static_cast<std::size_t>(di) * ksz + dj) * cin + ci) * cout + co;
  };
  auto oidx = [w, cout](int i, int j, int c) {
    return (static_cast<std::size_t>(i) * w + j) * cout + c;
  };
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int di = 0; di < ksz; ++di) {
        int si2 = i + di - pad;
        if (si2 < 0 || si2 >= h) continue;
        for (int dj = 0; dj < ksz; ++dj) {
          int sj = j + dj - pad;
          if (sj < 0 || sj >= w) continue;
          for (int ci = 0; ci < cin; ++ci) {
            double x = iv[iidx(si2, sj, ci)];
            if (x == 0.0) continue;
            for (int co = 0; co < cout; ++co) {
              out[oidx(i, j, co)] += x * kv[kidx(di, dj, ci, co)];
            }
          }
        }
      }
    }
  }
  Var v = make_node({h, w, cout}, std::move(out),
                    node(image).requires_grad || node(kernel).requires_grad);
  Tape* t = this;
  node(v).back = [t, v, image, kernel, h, w, cin, ksz, cout, pad, iidx, kidx, oidx]() {
    const auto& g = t->node(v).grad;
    const auto& iv2 = t->node(image).value;
    const auto& kv2 = t->node(kernel).value;
    auto& gi = t->node(image).grad;
    auto& gk = t->node(kernel).grad;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        for (int di = 0; di < ksz; ++di) {
          int si2 = i + di - pad;
          if (si2 < 0 || si2 >= h) continue;
          for (int dj = 0; dj < ksz; ++dj) {
            int sj = j + dj - pad;
            if (sj < 0 || sj >= w) continue;
            for (int ci = 0; ci < cin; ++ci) {
              for (int co = 0; co < cout; ++co) {
                double go = g[oidx(i, j, co)];
                gi[iidx(si2, sj, ci)] += go * kv2[kidx(di, dj, ci, co)];
                gk[kidx(di, dj, ci, co)] += go * iv2[iidx(si2, sj, ci)];
              }
            }
          }
        }
      }
    }
  };
  return v;
}

void Tape::backward(Var loss) {
  if (numel(node(loss).shape) != 1) {
    throw StateError("backward requires a scalar loss, got shape " +
                     shape_str(node(loss).shape));
  }
  for (Node& n : nodes_) {
    n.grad.assign(n.value.size(), 0.0);
  }
  node(loss).grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back && n.requires_grad) n.back();
  }
}

AdamState AdamState::for_params(const ParamStore& store, double lr) {
  AdamState st;
  st.learning_rate = lr;
  for (const Param& p : store.params) {
    st.m.emplace_back(p.value.size(), 0.0);
    st.v.emplace_back(p.value.size(), 0.0);
  }
  return st;
}

void adam_step(ParamStore& store, AdamState& state) {
  if (state.m.size() != store.params.size()) {
    throw StateError("AdamState does not match the parameter store");
  }
  state.step_count += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t pi = 0; pi < store.params.size(); ++pi) {
    Param& p = store.params[pi];
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p.value[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace uamsim::nn
