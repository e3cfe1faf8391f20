#include "inpo/autograd.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "inpo/error.hpp"

namespace inpo::ag {

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, Node&)> pull) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("invalid tape handle");
  return nodes_[v.id];
}

void Tape::check(const Tensor& t, const char* op) const {
  if (check_finite_ && !t.all_finite())
    throw NumericError(std::string("non-finite result in ") + op);
}

void Tape::accum(Var p, const Tensor& g) {
  Node& n = nodes_[p.id];
  if (!n.needs_grad) return;
  if (!n.grad_live) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.grad_live = true;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Tape::accum_scaled(Var p, const Tensor& g, real_t c) {
  Node& n = nodes_[p.id];
  if (!n.needs_grad) return;
  if (!n.grad_live) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.grad_live = true;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += c * g[i];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  check(value, "leaf");
  return push(std::move(value), requires_grad, nullptr);
}

void Tape::keep_grad(Var v) { node(v).needs_grad = true; }

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  Tensor out = inpo::matmul(av, bv);
  check(out, "matmul");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    if (t.nodes_[a.id].needs_grad) t.accum(a, matmul_nt(n.grad, t.val(b)));
    if (t.nodes_[b.id].needs_grad) t.accum(b, matmul_tn(t.val(a), n.grad));
  });
}

Var Tape::add(Var a, Var b) {
  Tensor out = inpo::add(val(a), val(b));
  check(out, "add");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    t.accum(a, n.grad);
    t.accum(b, n.grad);
  });
}

Var Tape::sub(Var a, Var b) {
  Tensor out = inpo::sub(val(a), val(b));
  check(out, "sub");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    t.accum(a, n.grad);
    t.accum_scaled(b, n.grad, -1);
  });
}

Var Tape::mul(Var a, Var b) {
  Tensor out = inpo::hadamard(val(a), val(b));
  check(out, "mul");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    if (t.nodes_[a.id].needs_grad) t.accum(a, hadamard(n.grad, t.val(b)));
    if (t.nodes_[b.id].needs_grad) t.accum(b, hadamard(n.grad, t.val(a)));
  });
}

Var Tape::div(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw DimensionError("div: shape mismatch");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  check(out, "div");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    const Tensor& bv = t.val(b);
    if (t.nodes_[a.id].needs_grad) {
      Tensor ga = n.grad;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= bv[i];
      t.accum(a, ga);
    }
    if (t.nodes_[b.id].needs_grad) {
      const Tensor& av = t.val(a);
      Tensor gb = n.grad;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= -av[i] / (bv[i] * bv[i]);
      t.accum(b, gb);
    }
  });
}

Var Tape::add_scalar(Var a, real_t c) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  check(out, "add_scalar");
  return push(std::move(out), nodes_[a.id].needs_grad,
              [a](Tape& t, Node& n) { t.accum(a, n.grad); });
}

Var Tape::mul_scalar(Var a, real_t c) {
  Tensor out = scale(val(a), c);
  check(out, "mul_scalar");
  return push(std::move(out), nodes_[a.id].needs_grad,
              [a, c](Tape& t, Node& n) { t.accum_scaled(a, n.grad, c); });
}

Var Tape::relu(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0;
  return push(std::move(out), nodes_[a.id].needs_grad, [a](Tape& t, Node& n) {
    const Tensor& x = t.val(a);
    Tensor g = n.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] <= 0) g[i] = 0;
    t.accum(a, g);
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) {
    real_t x = out[i];
    out[i] = x >= 0 ? 1 / (1 + std::exp(-x)) : std::exp(x) / (1 + std::exp(x));
  }
  check(out, "sigmoid");
  Var r = push(std::move(out), nodes_[a.id].needs_grad, nullptr);
  nodes_[r.id].pull = [a, r](Tape& t, Node& n) {
    const Tensor& s = t.val(r);
    Tensor g = n.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i] * (1 - s[i]);
    t.accum(a, g);
  };
  return r;
}

Var Tape::log(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] <= 0) throw NumericError("log of non-positive value");
    out[i] = std::log(out[i]);
  }
  check(out, "log");
  return push(std::move(out), nodes_[a.id].needs_grad, [a](Tape& t, Node& n) {
    const Tensor& x = t.val(a);
    Tensor g = n.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= x[i];
    t.accum(a, g);
  });
}

Var Tape::exp(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  check(out, "exp");
  Var r = push(std::move(out), nodes_[a.id].needs_grad, nullptr);
  nodes_[r.id].pull = [a, r](Tape& t, Node& n) {
    t.accum(a, hadamard(n.grad, t.val(r)));
  };
  return r;
}

Var Tape::pow_scalar(Var a, real_t p) { return exp(mul_scalar(log(a), p)); }

Var Tape::clamp(Var a, real_t lo, real_t hi) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out[i] < lo ? lo : (out[i] > hi ? hi : out[i]);
  return push(std::move(out), nodes_[a.id].needs_grad, [a, lo, hi](Tape& t, Node& n) {
    const Tensor& x = t.val(a);
    Tensor g = n.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] <= lo || x[i] >= hi) g[i] = 0;
    t.accum(a, g);
  });
}

Var Tape::sum(Var a) {
  real_t s = 0;
  const Tensor& x = val(a);
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  check(Tensor::scalar_of(s), "sum");
  return push(Tensor::scalar_of(s), nodes_[a.id].needs_grad, [a](Tape& t, Node& n) {
    const real_t g = n.grad[0];
    Tensor ga(t.val(a).rows(), t.val(a).cols(), g);
    t.accum(a, ga);
  });
}

Var Tape::mean(Var a) {
  const Tensor& x = val(a);
  if (x.empty()) throw ContractError("mean of empty tensor");
  return mul_scalar(sum(a), real_t(1) / static_cast<real_t>(x.size()));
}

Var Tape::col_sum(Var a) {
  const Tensor& x = val(a);
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x.at(r, c);
  check(out, "col_sum");
  return push(std::move(out), nodes_[a.id].needs_grad, [a](Tape& t, Node& n) {
    const Tensor& x = t.val(a);
    Tensor ga(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) ga.at(r, c) = n.grad[c];
    t.accum(a, ga);
  });
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Tensor& x = val(a);
  Tensor out(idx.size(), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || static_cast<std::size_t>(idx[k]) >= x.rows())
      throw ContractError("gather_rows: index out of range");
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(k, c) = x.at(idx[k], c);
  }
  return push(std::move(out), nodes_[a.id].needs_grad,
              [a, idx = std::move(idx)](Tape& t, Node& n) {
                const Tensor& x = t.val(a);
                Tensor ga(x.rows(), x.cols());
                for (std::size_t k = 0; k < idx.size(); ++k)
                  for (std::size_t c = 0; c < x.cols(); ++c)
                    ga.at(idx[k], c) += n.grad.at(k, c);
                t.accum(a, ga);
              });
}

Var Tape::scatter_add_rows(Var a, std::vector<int> idx, std::size_t out_rows) {
  const Tensor& x = val(a);
  if (idx.size() != x.rows()) throw DimensionError("scatter_add_rows: index count != rows");
  Tensor out(out_rows, x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || static_cast<std::size_t>(idx[k]) >= out_rows)
      throw ContractError("scatter_add_rows: index out of range");
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(idx[k], c) += x.at(k, c);
  }
  check(out, "scatter_add_rows");
  return push(std::move(out), nodes_[a.id].needs_grad,
              [a, idx = std::move(idx)](Tape& t, Node& n) {
                const Tensor& x = t.val(a);
                Tensor ga(x.rows(), x.cols());
                for (std::size_t k = 0; k < idx.size(); ++k)
                  for (std::size_t c = 0; c < x.cols(); ++c)
                    ga.at(k, c) = n.grad.at(idx[k], c);
                t.accum(a, ga);
              });
}

Var Tape::scale_rows(Var a, std::vector<real_t> weights) {
  const Tensor& x = val(a);
  if (weights.size() != x.rows()) throw DimensionError("scale_rows: weight count != rows");
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) *= weights[r];
  check(out, "scale_rows");
  return push(std::move(out), nodes_[a.id].needs_grad,
              [a, weights = std::move(weights)](Tape& t, Node& n) {
                Tensor ga = n.grad;
                for (std::size_t r = 0; r < ga.rows(); ++r)
                  for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) *= weights[r];
                t.accum(a, ga);
              });
}

Var Tape::row_dot(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw DimensionError("row_dot: shape mismatch");
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    real_t s = 0;
    for (std::size_t c = 0; c < av.cols(); ++c) s += av.at(r, c) * bv.at(r, c);
    out.at(r, 0) = s;
  }
  check(out, "row_dot");
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    if (t.nodes_[a.id].needs_grad) {
      Tensor ga(av.rows(), av.cols());
      for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c)
          ga.at(r, c) = n.grad.at(r, 0) * bv.at(r, c);
      t.accum(a, ga);
    }
    if (t.nodes_[b.id].needs_grad) {
      Tensor gb(bv.rows(), bv.cols());
      for (std::size_t r = 0; r < bv.rows(); ++r)
        for (std::size_t c = 0; c < bv.cols(); ++c)
          gb.at(r, c) = n.grad.at(r, 0) * av.at(r, c);
      t.accum(b, gb);
    }
  });
}

Var Tape::concat_rows(Var a, Var b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (av.cols() != bv.cols()) throw DimensionError("concat_rows: column mismatch");
  Tensor out(av.rows() + bv.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i];
  for (std::size_t i = 0; i < bv.size(); ++i) out[av.size() + i] = bv[i];
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, Node& n) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    if (t.nodes_[a.id].needs_grad) {
      Tensor ga(av.rows(), av.cols());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = n.grad[i];
      t.accum(a, ga);
    }
    if (t.nodes_[b.id].needs_grad) {
      Tensor gb(bv.rows(), bv.cols());
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = n.grad[av.size() + i];
      t.accum(b, gb);
    }
  });
}

namespace {
Tensor softmax_of(const Tensor& x) {
  Tensor s(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    real_t m = x.at(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) m = std::max(m, x.at(r, c));
    real_t z = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      s.at(r, c) = std::exp(x.at(r, c) - m);
      z += s.at(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) s.at(r, c) /= z;
  }
  return s;
}
}  // namespace

Var Tape::softmax_rows(Var a) {
  Tensor out = softmax_of(val(a));
  check(out, "softmax_rows");
  Var r = push(std::move(out), nodes_[a.id].needs_grad, nullptr);
  nodes_[r.id].pull = [a, r](Tape& t, Node& n) {
    const Tensor& s = t.val(r);
    Tensor ga(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
      real_t dot = 0;
      for (std::size_t c = 0; c < s.cols(); ++c) dot += n.grad.at(i, c) * s.at(i, c);
      for (std::size_t c = 0; c < s.cols(); ++c)
        ga.at(i, c) = s.at(i, c) * (n.grad.at(i, c) - dot);
    }
    t.accum(a, ga);
  };
  return r;
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& x = val(a);
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    real_t m = x.at(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) m = std::max(m, x.at(r, c));
    real_t z = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) z += std::exp(x.at(r, c) - m);
    const real_t lz = m + std::log(z);
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(r, c) - lz;
  }
  check(out, "log_softmax_rows");
  return push(std::move(out), nodes_[a.id].needs_grad, [a](Tape& t, Node& n) {
    Tensor s = softmax_of(t.val(a));
    Tensor ga(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
      real_t gsum = 0;
      for (std::size_t c = 0; c < s.cols(); ++c) gsum += n.grad.at(i, c);
      for (std::size_t c = 0; c < s.cols(); ++c)
        ga.at(i, c) = n.grad.at(i, c) - s.at(i, c) * gsum;
    }
    t.accum(a, ga);
  });
}

Var Tape::mul_const(Var a, Tensor c) {
  Tensor out = hadamard(val(a), c);
  check(out, "mul_const");
  return push(std::move(out), nodes_[a.id].needs_grad,
              [a, c = std::move(c)](Tape& t, Node& n) {
                t.accum(a, hadamard(n.grad, c));
              });
}

void Tape::backward(Var loss) {
  Node& top = node(loss);
  if (!top.value.is_scalar()) throw ContractError("backward: loss must be scalar");
  // Reset gradients from any previous pass; allocate for every node that
  // needs one so unreached parameters read back as zero.
  for (Node& n : nodes_) {
    n.grad_live = false;
    if (n.needs_grad) {
      n.grad = Tensor(n.value.rows(), n.value.cols());
      n.grad_live = true;
    }
  }
  if (!top.grad_live) {
    top.grad = Tensor(1, 1);
    top.grad_live = true;
  }
  top.grad[0] = 1;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.grad_live || !n.pull) continue;
    n.pull(*this, n);
  }
}

const Tensor& Tape::value(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("invalid tape handle");
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("invalid tape handle");
  const Node& n = nodes_[v.id];
  if (!n.grad_live) throw ContractError("gradient not tracked for this node");
  return n.grad;
}

bool Tape::has_grad(Var v) const {
  return v.valid() && v.id < static_cast<int>(nodes_.size()) && nodes_[v.id].grad_live;
}

FdReport finite_difference_check(const LossBuilder& build,
                                 const std::vector<Tensor>& params,
                                 double epsilon) {
  if (epsilon <= 0) throw ContractError("finite_difference_check: epsilon must be > 0");

  auto eval = [&](const std::vector<Tensor>& p) -> double {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(p.size());
    for (const Tensor& x : p) vars.push_back(t.leaf(x, false));
    Var loss = build(t, vars);
    const Tensor& v = t.value(loss);
    if (!v.is_scalar()) throw ContractError("finite_difference_check: loss must be scalar");
    if (!v.all_finite()) throw NumericError("finite_difference_check: non-finite loss");
    return v.scalar();
  };

  // Analytic gradients.
  Tape t;
  std::vector<Var> vars;
  for (const Tensor& x : params) vars.push_back(t.leaf(x, true));
  Var loss = build(t, vars);
  t.backward(loss);

  FdReport report;
  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& analytic = t.grad(vars[pi]);
    for (std::size_t i = 0; i < params[pi].size(); ++i) {
      const real_t x0 = params[pi][i];
      work[pi][i] = x0 + epsilon;
      const double fp = eval(work);
      work[pi][i] = x0 - epsilon;
      const double fm = eval(work);
      work[pi][i] = x0;
      const double f0 = eval(work);
      const double dplus = (fp - f0) / epsilon;
      const double dminus = (f0 - fm) / epsilon;
      const double scale = std::max({std::abs(dplus), std::abs(dminus), 1.0});
      // One-sided derivatives disagree: nondifferentiable point inside the
      // window (relu kink etc.) -- report, don't fail.
      if (std::abs(dplus - dminus) > 1e-3 * scale) {
        ++report.excluded;
        continue;
      }
      const double central = (fp - fm) / (2 * epsilon);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(central), 1e-8});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(a - central) / denom);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace inpo::ag
