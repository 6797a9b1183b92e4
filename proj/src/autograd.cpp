#include "toatod/autograd.hpp"

#include <cmath>
#include <limits>

#include "toatod/error.hpp"

namespace toatod::ag {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw ContractError(std::string("dimension mismatch in ") + what);
}

}  // namespace

Parameter::Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) { zero_grad(); }

const Mat& Graph::value(Var v) const { return nodes_[v.id].value(); }

const Mat& Graph::grad(Var v) const { return nodes_[v.id].grad; }

Var Graph::push(Mat value, bool requires_grad) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = record_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Mat& Graph::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value().rows(), n.value().cols());
  return n.grad;
}

bool Graph::any_requires(std::initializer_list<Var> vs) const {
  for (Var v : vs) {
    if (nodes_[v.id].requires_grad) return true;
  }
  return false;
}

Var Graph::constant(Mat m) { return push(std::move(m), false); }

Var Graph::param(Parameter& p, bool trainable) {
  Node n;
  n.external = &p.value;
  n.requires_grad = record_ && trainable;
  if (n.requires_grad) n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::matmul(Var a, Var b) {
  check(value(a).cols() == value(b).rows(), "matmul");
  Var out = push(value(a) * value(b), any_requires({a, b}));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].back = [this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      if (nodes_[a.id].requires_grad) grad_ref(a.id).noalias() += g * value(b).transpose();
      if (nodes_[b.id].requires_grad) grad_ref(b.id).noalias() += value(a).transpose() * g;
    };
  }
  return out;
}

Var Graph::add(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
  Var out = push(value(a) + value(b), any_requires({a, b}));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].back = [this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      if (nodes_[a.id].requires_grad) grad_ref(a.id) += g;
      if (nodes_[b.id].requires_grad) grad_ref(b.id) += g;
    };
  }
  return out;
}

Var Graph::add_row(Var x, Var row) {
  check(value(row).rows() == 1 && value(row).cols() == value(x).cols(), "add_row");
  Mat y = value(x);
  y.rowwise() += value(row).row(0);
  Var out = push(std::move(y), any_requires({x, row}));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].back = [this, x, row, out] {
      const Mat& g = nodes_[out.id].grad;
      if (nodes_[x.id].requires_grad) grad_ref(x.id) += g;
      if (nodes_[row.id].requires_grad) grad_ref(row.id) += g.colwise().sum();
    };
  }
  return out;
}

Var Graph::scale(Var x, double s) {
  Var out = push(value(x) * s, any_requires({x}));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].back = [this, x, out, s] { grad_ref(x.id) += nodes_[out.id].grad * s; };
  }
  return out;
}

Var Graph::relu(Var x) {
  Var out = push(value(x).cwiseMax(0.0), any_requires({x}));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].back = [this, x, out] {
      const Mat& g = nodes_[out.id].grad;
      grad_ref(x.id).array() += (value(x).array() > 0.0).select(g.array(), 0.0);
    };
  }
  return out;
}

Mat layer_norm_rows(const Mat& x, const Mat& gamma, const Mat& beta, double eps) {
  check(gamma.rows() == 1 && beta.rows() == 1 && gamma.cols() == x.cols() && beta.cols() == x.cols(), "layer_norm");
  Mat y(x.rows(), x.cols());
  const double d = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mu).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + eps);
    y.row(i) = ((x.row(i).array() - mu) * inv * gamma.row(0).array() + beta.row(0).array()).matrix();
  }
  return y;
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Mat& xv = value(x);
  Mat y = layer_norm_rows(xv, value(gamma), value(beta), eps);
  Var out = push(std::move(y), any_requires({x, gamma, beta}));
  if (nodes_[out.id].requires_grad) {
    const double d = static_cast<double>(xv.cols());
    Mat xhat(xv.rows(), xv.cols());
    Eigen::VectorXd inv(xv.rows());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const double mu = xv.row(i).sum() / d;
      const double var = (xv.row(i).array() - mu).square().sum() / d;
      inv(i) = 1.0 / std::sqrt(var + eps);
      xhat.row(i) = (xv.row(i).array() - mu) * inv(i);
    }
    nodes_[out.id].back = [this, x, gamma, beta, out, xhat = std::move(xhat), inv = std::move(inv), d] {
      const Mat& g = nodes_[out.id].grad;
      if (nodes_[gamma.id].requires_grad) grad_ref(gamma.id) += (g.array() * xhat.array()).colwise().sum().matrix();
      if (nodes_[beta.id].requires_grad) grad_ref(beta.id) += g.colwise().sum();
      if (nodes_[x.id].requires_grad) {
        Mat& gx = grad_ref(x.id);
        const auto gam = value(gamma).row(0).array();
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const Eigen::ArrayXd dxhat = (g.row(i).array() * gam).transpose();
          const double m1 = dxhat.sum() / d;
          const double m2 = (dxhat * xhat.row(i).array().transpose()).sum() / d;
          gx.row(i).array() += (inv(i) * (dxhat - m1 - xhat.row(i).array().transpose() * m2)).transpose();
        }
      }
    };
  }
  return out;
}

Var Graph::embedding(Var table, Ids ids) {
  const Mat& t = value(table);
  Mat y(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) throw ContractError("token id out of embedding range");
    y.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  Var out = push(std::move(y), any_requires({table}));
  if (nodes_[out.id].requires_grad) {
    std::vector<std::int32_t> copy(ids.begin(), ids.end());
    nodes_[out.id].back = [this, table, out, copy = std::move(copy)] {
      const Mat& g = nodes_[out.id].grad;
      Mat& gt = grad_ref(table.id);
      for (std::size_t i = 0; i < copy.size(); ++i) gt.row(copy[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  }
  return out;
}

Var Graph::attention(Var q, Var k, Var v, int n_heads, bool causal) {
  const Mat& Q = value(q);
  const Mat& K = value(k);
  const Mat& V = value(v);
  check(Q.cols() == K.cols() && K.cols() == V.cols() && K.rows() == V.rows(), "attention");
  check(n_heads >= 1 && Q.cols() % n_heads == 0, "attention heads");
  check(K.rows() >= 1, "attention (no keys)");
  check(!causal || Q.rows() == K.rows(), "causal attention");
  const Eigen::Index n = Q.rows();
  const Eigen::Index m = K.rows();
  const Eigen::Index dk = Q.cols() / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const bool needs = any_requires({q, k, v});
  std::vector<Mat> probs;
  if (needs) probs.reserve(static_cast<std::size_t>(n_heads));
  Mat out(n, Q.cols());
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = h * dk;
    Mat s = Q.middleCols(c0, dk) * K.middleCols(c0, dk).transpose() * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index limit = causal ? i + 1 : m;
      const double mx = s.row(i).head(limit).maxCoeff();
      double z = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double e = j < limit ? std::exp(s(i, j) - mx) : 0.0;
        s(i, j) = e;
        z += e;
      }
      s.row(i) /= z;
    }
    out.middleCols(c0, dk).noalias() = s * V.middleCols(c0, dk);
    if (needs) probs.push_back(std::move(s));
  }
  Var res = push(std::move(out), needs);
  if (nodes_[res.id].requires_grad) {
    nodes_[res.id].back = [this, q, k, v, res, probs = std::move(probs), n_heads, dk, scale] {
      const Mat& g = nodes_[res.id].grad;
      const Mat& Q = value(q);
      const Mat& K = value(k);
      const Mat& V = value(v);
      const bool gq = nodes_[q.id].requires_grad;
      const bool gk = nodes_[k.id].requires_grad;
      const bool gv = nodes_[v.id].requires_grad;
      for (int h = 0; h < n_heads; ++h) {
        const Eigen::Index c0 = h * dk;
        const Mat& P = probs[static_cast<std::size_t>(h)];
        const auto dO = g.middleCols(c0, dk);
        if (gv) grad_ref(v.id).middleCols(c0, dk).noalias() += P.transpose() * dO;
        if (!gq && !gk) continue;
        Mat dP = dO * V.middleCols(c0, dk).transpose();
        const Eigen::VectorXd rows = (dP.array() * P.array()).rowwise().sum();
        Mat dS = (P.array() * (dP.array().colwise() - rows.array())).matrix();
        if (gq) grad_ref(q.id).middleCols(c0, dk).noalias() += dS * K.middleCols(c0, dk) * scale;
        if (gk) grad_ref(k.id).middleCols(c0, dk).noalias() += dS.transpose() * Q.middleCols(c0, dk) * scale;
      }
    };
  }
  return res;
}

Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

Var Graph::nll_sum(Var logits, Ids targets, std::int32_t ignore) {
  const Mat& L = value(logits);
  check(static_cast<std::size_t>(L.rows()) == targets.size(), "nll_sum");
  const Mat logp = log_softmax_rows(L);
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] == ignore) continue;
    if (targets[t] < 0 || targets[t] >= L.cols()) throw ContractError("target id out of vocabulary range");
    total -= logp(static_cast<Eigen::Index>(t), targets[t]);
  }
  Mat v(1, 1);
  v(0, 0) = total;
  Var out = push(std::move(v), any_requires({logits}));
  if (nodes_[out.id].requires_grad) {
    std::vector<std::int32_t> copy(targets.begin(), targets.end());
    nodes_[out.id].back = [this, logits, out, logp, copy = std::move(copy), ignore] {
      const double g = nodes_[out.id].grad(0, 0);
      Mat& gl = grad_ref(logits.id);
      for (std::size_t t = 0; t < copy.size(); ++t) {
        if (copy[t] == ignore) continue;
        const auto r = static_cast<Eigen::Index>(t);
        gl.row(r) += g * logp.row(r).array().exp().matrix();
        gl(r, copy[t]) -= g;
      }
    };
  }
  return out;
}

Var Graph::sum(Var x) {
  Mat v(1, 1);
  v(0, 0) = value(x).sum();
  Var out = push(std::move(v), any_requires({x}));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].back = [this, x, out] { grad_ref(x.id).array() += nodes_[out.id].grad(0, 0); };
  }
  return out;
}

void Graph::backward(Var root, double seed) {
  if (!record_) throw ContractError("backward on a graph built without recording");
  if (value(root).size() != 1) throw ContractError("backward root must be a scalar");
  if (!nodes_[root.id].requires_grad) return;
  grad_ref(root.id)(0, 0) += seed;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.back) n.back();
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace toatod::ag
