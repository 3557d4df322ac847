#include "nrm/diff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nrm/errors.hpp"

namespace nrm::diff {

namespace {

// Probabilities below this floor are clamped inside logs; the clamp has zero
// gradient, matching the usual clamp semantics.
constexpr double kProbFloor = 1e-12;

Graph &graph_of(Value a) {
  if (!a.graph)
    throw InputError("value is not attached to a graph");
  return *a.graph;
}

Graph &graph_of(Value a, Value b) {
  if (a.graph != b.graph)
    throw InputError("values belong to different graphs");
  return graph_of(a);
}

void require_same_shape(const Tensor &a, const Tensor &b, const char *op) {
  if (a.shape() != b.shape())
    throw InputError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void require_rank2(const Tensor &a, const char *op) {
  if (a.rank() != 2)
    throw InputError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

// Shared softmax forward over the last axis of x * inv_tau.
Tensor softmax_rows(const Tensor &x, double inv_tau) {
  Tensor y(x.shape());
  const std::size_t n = x.rows(), c = x.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double *in = x.data() + r * c;
    double *out = y.data() + r * c;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      mx = std::max(mx, in[j] * inv_tau);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      z += out[j] = std::exp(in[j] * inv_tau - mx);
    for (std::size_t j = 0; j < c; ++j)
      out[j] /= z;
  }
  return y;
}

template <typename F, typename D> Value unary(Value a, F forward, D derivative) {
  Graph &g = graph_of(a);
  const Tensor &x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = forward(x[i]);
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia, derivative](Graph &g, std::uint32_t self) {
    const Tensor &x = g.value_of(ia);
    const Tensor &y = g.value_of(self);
    const Tensor &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    for (std::size_t i = 0; i < x.size(); ++i)
      dx[i] += dy[i] * derivative(x[i], y[i]);
  });
}

void check_targets(const Tensor &x, std::span<const std::size_t> target, const char *op) {
  require_rank2(x, op);
  if (target.size() != x.rows())
    throw InputError(std::string(op) + ": " + std::to_string(target.size()) +
                     " targets for " + std::to_string(x.rows()) + " rows");
  for (std::size_t t : target)
    if (t >= x.cols())
      throw InputError(std::string(op) + ": class index out of range");
}

} // namespace

const Tensor &Value::value() const { return graph_of(*this).value(*this); }

Value Graph::constant(Tensor t) { return record(std::move(t), nullptr); }

Value Graph::param(Parameter &p) {
  Node node;
  node.external = &p.value;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Graph::record(Tensor value, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor &Graph::value_of(std::uint32_t id) const {
  const Node &n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor &Graph::value(Value v) const {
  if (v.graph != this || v.id >= nodes_.size())
    throw InputError("value does not belong to this graph");
  return value_of(v.id);
}

const Tensor &Graph::grad(Value v) const {
  if (v.graph != this || v.id >= nodes_.size())
    throw InputError("value does not belong to this graph");
  return nodes_[v.id].grad;
}

void Graph::backward(Value loss) {
  const Tensor &l = value(loss);
  if (l.size() != 1)
    throw InputError("backward() needs a single-element loss, got " + shape_string(l.shape()));
  if (!l.all_finite())
    throw NumericError("loss is not finite");
  for (std::uint32_t i = 0; i <= loss.id; ++i) {
    Node &n = nodes_[i];
    const Tensor &v = n.external ? *n.external : n.value;
    if (n.grad.shape() != v.shape())
      n.grad = Tensor(v.shape());
    else
      n.grad.fill(0.0);
  }
  nodes_[loss.id].grad[0] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node &n = nodes_[i];
    if (n.backward) {
      n.backward(*this, i);
    } else if (n.param) {
      Tensor &pg = n.param->grad;
      if (pg.shape() != n.grad.shape())
        pg = Tensor(n.grad.shape());
      for (std::size_t k = 0; k < pg.size(); ++k)
        pg[k] += n.grad[k];
    }
  }
}

void Graph::clear() { nodes_.clear(); }

Value matmul(Value a, Value b) {
  Graph &g = graph_of(a, b);
  const Tensor &x = a.value(), &w = b.value();
  require_rank2(x, "matmul");
  require_rank2(w, "matmul");
  const std::size_t n = x.dim(0), k = x.dim(1), m = w.dim(1);
  if (w.dim(0) != k)
    throw InputError("matmul: inner dimensions differ " + shape_string(x.shape()) + " x " +
                     shape_string(w.shape()));
  Tensor y({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double *yr = y.data() + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const double xv = x[i * k + t];
      if (xv == 0.0)
        continue;
      const double *wr = w.data() + t * m;
      for (std::size_t j = 0; j < m; ++j)
        yr[j] += xv * wr[j];
    }
  }
  const std::uint32_t ia = a.id, ib = b.id;
  return g.record(std::move(y), [ia, ib, n, k, m](Graph &g, std::uint32_t self) {
    const Tensor &x = g.value_of(ia), &w = g.value_of(ib), &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < k; ++t) {
        double s = 0.0;
        const double *wr = w.data() + t * m;
        const double *dyr = dy.data() + i * m;
        for (std::size_t j = 0; j < m; ++j)
          s += dyr[j] * wr[j];
        dx[i * k + t] += s;
      }
    Tensor &dw = g.grad_mut(ib);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < k; ++t) {
        const double xv = x[i * k + t];
        if (xv == 0.0)
          continue;
        double *dwr = dw.data() + t * m;
        const double *dyr = dy.data() + i * m;
        for (std::size_t j = 0; j < m; ++j)
          dwr[j] += xv * dyr[j];
      }
  });
}

Value add(Value a, Value b) {
  Graph &g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor &bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] += bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.record(std::move(y), [ia, ib](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    for (std::uint32_t id : {ia, ib}) {
      Tensor &d = g.grad_mut(id);
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += dy[i];
    }
  });
}

Value sub(Value a, Value b) {
  Graph &g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor &bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] -= bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.record(std::move(y), [ia, ib](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    Tensor &da = g.grad_mut(ia);
    for (std::size_t i = 0; i < da.size(); ++i)
      da[i] += dy[i];
    Tensor &db = g.grad_mut(ib);
    for (std::size_t i = 0; i < db.size(); ++i)
      db[i] -= dy[i];
  });
}

Value mul(Value a, Value b) {
  Graph &g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor &bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] *= bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.record(std::move(y), [ia, ib](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    const Tensor &av = g.value_of(ia), &bv = g.value_of(ib);
    Tensor &da = g.grad_mut(ia);
    for (std::size_t i = 0; i < da.size(); ++i)
      da[i] += dy[i] * bv[i];
    Tensor &db = g.grad_mut(ib);
    for (std::size_t i = 0; i < db.size(); ++i)
      db[i] += dy[i] * av[i];
  });
}

Value scale(Value a, double s) {
  Graph &g = graph_of(a);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] *= s;
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia, s](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    Tensor &da = g.grad_mut(ia);
    for (std::size_t i = 0; i < da.size(); ++i)
      da[i] += s * dy[i];
  });
}

Value add_row(Value a, Value b) {
  Graph &g = graph_of(a, b);
  const Tensor &x = a.value(), &r = b.value();
  require_rank2(x, "add_row");
  if (r.size() != x.cols() || r.rows() != 1)
    throw InputError("add_row: row " + shape_string(r.shape()) + " does not fit " +
                     shape_string(x.shape()));
  Tensor y = x;
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      y[i * m + j] += r[j];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.record(std::move(y), [ia, ib, n, m](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    Tensor &da = g.grad_mut(ia);
    for (std::size_t i = 0; i < da.size(); ++i)
      da[i] += dy[i];
    Tensor &db = g.grad_mut(ib);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        db[j] += dy[i * m + j];
  });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty())
    throw InputError("concat_cols: nothing to concatenate");
  Graph &g = graph_of(parts[0]);
  const std::size_t n = parts[0].value().rows();
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Value p : parts) {
    graph_of(parts[0], p);
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != n)
      throw InputError("concat_cols: row counts differ");
    ids.push_back(p.id);
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor y({n, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor &x = parts[k].value();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(x.data() + i * widths[k], widths[k], y.data() + i * total + off);
    off += widths[k];
  }
  return g.record(std::move(y), [ids, widths, n, total](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor &dx = g.grad_mut(ids[k]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < widths[k]; ++j)
          dx[i * widths[k] + j] += dy[i * total + off + j];
      off += widths[k];
    }
  });
}

Value concat_rows(std::span<const Value> parts) {
  if (parts.empty())
    throw InputError("concat_rows: nothing to concatenate");
  Graph &g = graph_of(parts[0]);
  const std::size_t m = parts[0].value().cols();
  std::vector<std::uint32_t> ids;
  std::vector<double> data;
  for (Value p : parts) {
    graph_of(parts[0], p);
    require_rank2(p.value(), "concat_rows");
    if (p.value().cols() != m)
      throw InputError("concat_rows: column counts differ");
    ids.push_back(p.id);
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  }
  const std::size_t n = data.size() / m;
  return g.record(Tensor({n, m}, std::move(data)), [ids](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    std::size_t off = 0;
    for (std::uint32_t id : ids) {
      Tensor &dx = g.grad_mut(id);
      for (std::size_t i = 0; i < dx.size(); ++i)
        dx[i] += dy[off + i];
      off += dx.size();
    }
  });
}

Value slice_cols(Value a, std::size_t begin, std::size_t end) {
  Graph &g = graph_of(a);
  const Tensor &x = a.value();
  require_rank2(x, "slice_cols");
  if (begin >= end || end > x.cols())
    throw InputError("slice_cols: bad range");
  const std::size_t n = x.rows(), m = x.cols(), w = end - begin;
  Tensor y({n, w});
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(x.data() + i * m + begin, w, y.data() + i * w);
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia, n, m, w, begin](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j)
        dx[i * m + begin + j] += dy[i * w + j];
  });
}

Value slice_rows(Value a, std::size_t begin, std::size_t end) {
  Graph &g = graph_of(a);
  const Tensor &x = a.value();
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.rows())
    throw InputError("slice_rows: bad range");
  const std::size_t m = x.cols();
  Tensor y({end - begin, m},
           std::vector<double>(x.data() + begin * m, x.data() + end * m));
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia, begin, m](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[begin * m + i] += dy[i];
  });
}

Value tanh(Value a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Value sigmoid(Value a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Value relu(Value a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value log(Value a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value tau_softmax(Value a, double tau) {
  if (!(tau > 0.0) || tau > 1.0)
    throw InputError("temperature must lie in (0, 1], got " + std::to_string(tau));
  Graph &g = graph_of(a);
  const double inv = 1.0 / tau;
  Tensor y = softmax_rows(a.value(), inv);
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia, inv](Graph &g, std::uint32_t self) {
    const Tensor &y = g.value_of(self), &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    const std::size_t n = y.rows(), c = y.cols();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j)
        dot += dy[r * c + j] * y[r * c + j];
      for (std::size_t j = 0; j < c; ++j)
        dx[r * c + j] += inv * y[r * c + j] * (dy[r * c + j] - dot);
    }
  });
}

Value softmax(Value a) { return tau_softmax(a, 1.0); }

Value log_softmax(Value a) {
  Graph &g = graph_of(a);
  const Tensor &x = a.value();
  Tensor y(x.shape());
  const std::size_t n = x.rows(), c = x.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double *in = x.data() + r * c;
    double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      z += std::exp(in[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j)
      y[r * c + j] = in[j] - lz;
  }
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia](Graph &g, std::uint32_t self) {
    const Tensor &y = g.value_of(self), &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    const std::size_t n = y.rows(), c = y.cols();
    for (std::size_t r = 0; r < n; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j)
        total += dy[r * c + j];
      for (std::size_t j = 0; j < c; ++j)
        dx[r * c + j] += dy[r * c + j] - std::exp(y[r * c + j]) * total;
    }
  });
}

Value sum(Value a) {
  Graph &g = graph_of(a);
  double s = 0.0;
  for (double v : a.value().values())
    s += v;
  const std::uint32_t ia = a.id;
  return g.record(Tensor::scalar(s), [ia](Graph &g, std::uint32_t self) {
    const double d = g.grad_of(self)[0];
    Tensor &dx = g.grad_mut(ia);
    for (std::size_t i = 0; i < dx.size(); ++i)
      dx[i] += d;
  });
}

Value mean(Value a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Value pick(Value a, std::span<const std::size_t> index) {
  Graph &g = graph_of(a);
  const Tensor &x = a.value();
  check_targets(x, index, "pick");
  const std::size_t n = x.rows(), c = x.cols();
  Tensor y({n, 1});
  for (std::size_t i = 0; i < n; ++i)
    y[i] = x[i * c + index[i]];
  std::vector<std::size_t> idx(index.begin(), index.end());
  const std::uint32_t ia = a.id;
  return g.record(std::move(y), [ia, idx, c](Graph &g, std::uint32_t self) {
    const Tensor &dy = g.grad_of(self);
    Tensor &dx = g.grad_mut(ia);
    for (std::size_t i = 0; i < idx.size(); ++i)
      dx[i * c + idx[i]] += dy[i];
  });
}

Value cross_entropy_logits(Value logits, std::span<const std::size_t> target) {
  check_targets(logits.value(), target, "cross_entropy");
  return scale(sum(pick(log_softmax(logits), target)),
               -1.0 / static_cast<double>(target.size()));
}

Value cross_entropy_probs(Value probs, std::span<const std::size_t> target) {
  Graph &g = graph_of(probs);
  const Tensor &p = probs.value();
  check_targets(p, target, "cross_entropy");
  const std::size_t n = p.rows(), c = p.cols();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    loss -= std::log(std::max(p[i * c + target[i]], kProbFloor));
  loss /= static_cast<double>(n);
  std::vector<std::size_t> idx(target.begin(), target.end());
  const std::uint32_t ia = probs.id;
  return g.record(Tensor::scalar(loss), [ia, idx, c](Graph &g, std::uint32_t self) {
    const double d = g.grad_of(self)[0] / static_cast<double>(idx.size());
    const Tensor &p = g.value_of(ia);
    Tensor &dp = g.grad_mut(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double pv = p[i * c + idx[i]];
      if (pv > kProbFloor)
        dp[i * c + idx[i]] -= d / pv;
    }
  });
}

Value dropout(Value a, double rate, std::mt19937_64 &rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw InputError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0)
    return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(a.value().shape());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(a, graph_of(a).constant(std::move(mask)));
}

Value mixture_transition(Value p, Value q, Value m) {
  Graph &g = graph_of(p, q);
  graph_of(p, m);
  const Tensor &pv = p.value(), &qv = q.value(), &mv = m.value();
  if (mv.rank() != 3 || mv.dim(1) != mv.dim(2))
    throw InputError("mixture_transition: transitions must be [P,Q,Q], got " +
                     shape_string(mv.shape()));
  const std::size_t np = mv.dim(0), nq = mv.dim(1);
  if (pv.size() != np || pv.rows() != 1 || qv.size() != nq || qv.rows() != 1)
    throw InputError("mixture_transition: expected rows of width " + std::to_string(np) +
                     " and " + std::to_string(nq));
  Tensor y({1, nq});
  for (std::size_t i = 0; i < np; ++i) {
    if (pv[i] == 0.0)
      continue;
    for (std::size_t k = 0; k < nq; ++k) {
      const double w = pv[i] * qv[k];
      if (w == 0.0)
        continue;
      const double *row = mv.data() + (i * nq + k) * nq;
      for (std::size_t j = 0; j < nq; ++j)
        y[j] += w * row[j];
    }
  }
  const std::uint32_t ip = p.id, iq = q.id, im = m.id;
  return g.record(std::move(y), [ip, iq, im, np, nq](Graph &g, std::uint32_t self) {
    const Tensor &pv = g.value_of(ip), &qv = g.value_of(iq), &mv = g.value_of(im);
    const Tensor &dy = g.grad_of(self);
    Tensor &dp = g.grad_mut(ip);
    Tensor &dq = g.grad_mut(iq);
    Tensor &dm = g.grad_mut(im);
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t k = 0; k < nq; ++k) {
        const double *row = mv.data() + (i * nq + k) * nq;
        double *drow = dm.data() + (i * nq + k) * nq;
        double s = 0.0;
        const double w = pv[i] * qv[k];
        for (std::size_t j = 0; j < nq; ++j) {
          s += row[j] * dy[j];
          drow[j] += w * dy[j];
        }
        dp[i] += qv[k] * s;
        dq[k] += pv[i] * s;
      }
  });
}

} // namespace nrm::diff
