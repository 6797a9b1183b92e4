#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace toatod::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Ids = std::span<const std::int32_t>;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v);

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

struct Var {
  std::size_t id = 0;
};

// Tape of matrix-valued nodes. Row i of an activation is position i of a
// sequence. A graph built with record=false only evaluates values (no closures,
// no gradient bookkeeping), which is what inference uses.
//
// Parameter leaves reference Parameter::value without copying; the parameter
// must outlive the graph. backward() adds into Parameter::grad only for leaves
// created with trainable=true.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  const Mat& value(Var v) const;
  const Mat& grad(Var v) const;  // zero-sized until backward reaches the node
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  Var constant(Mat m);
  Var param(Parameter& p, bool trainable);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var x, Var row);  // row (1 x c) broadcast over x's rows
  Var scale(Var x, double s);
  Var relu(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = kLayerNormEps);
  Var embedding(Var table, Ids ids);
  // Multi-head scaled dot-product attention; q is n x d, k and v are m x d.
  // With causal=true position i only sees keys j <= i (requires n == m).
  Var attention(Var q, Var k, Var v, int n_heads, bool causal);
  // 1x1: sum over rows t with targets[t] != ignore of -log softmax(logits_t)[targets[t]].
  Var nll_sum(Var logits, Ids targets, std::int32_t ignore);
  Var sum(Var x);  // 1x1

  void backward(Var root, double seed = 1.0);

  static constexpr double kLayerNormEps = 1e-6;

 private:
  struct Node {
    Mat own;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void()> back;

    const Mat& value() const { return external ? *external : own; }
  };

  Var push(Mat value, bool requires_grad);
  Mat& grad_ref(std::size_t id);
  bool any_requires(std::initializer_list<Var> vs) const;

  bool record_;
  std::vector<Node> nodes_;
};

// Plain-matrix helpers shared by the graph ops and by oracles in tests.
Mat layer_norm_rows(const Mat& x, const Mat& gamma, const Mat& beta, double eps = Graph::kLayerNormEps);
Mat log_softmax_rows(const Mat& logits);

}  // namespace toatod::ag
