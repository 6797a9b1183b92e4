#include "toatod/adapter.hpp"

#include <cmath>

#include "toatod/error.hpp"

namespace toatod {

void AdapterSpec::validate(int d_model) const {
  if (bottleneck_dim < 1 || bottleneck_dim > d_model) {
    throw ConfigError("adapter bottleneck_dim must be in [1, d_model]; got " + std::to_string(bottleneck_dim));
  }
}

AdapterLayer AdapterLayer::init(int d_model, int bottleneck, std::mt19937_64& rng, const std::string& prefix) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_model)));
  ag::Mat down(d_model, bottleneck);
  for (Eigen::Index i = 0; i < down.size(); ++i) down.data()[i] = normal(rng);
  AdapterLayer a;
  a.down_w = ag::Parameter(prefix + ".down_w", std::move(down));
  a.down_b = ag::Parameter(prefix + ".down_b", ag::Mat::Zero(1, bottleneck));
  a.up_w = ag::Parameter(prefix + ".up_w", ag::Mat::Zero(bottleneck, d_model));
  a.up_b = ag::Parameter(prefix + ".up_b", ag::Mat::Zero(1, d_model));
  a.ln_gamma = ag::Parameter(prefix + ".ln_gamma", ag::Mat::Ones(1, d_model));
  a.ln_beta = ag::Parameter(prefix + ".ln_beta", ag::Mat::Zero(1, d_model));
  return a;
}

std::vector<ag::Parameter*> AdapterLayer::parameters() {
  return {&down_w, &down_b, &up_w, &up_b, &ln_gamma, &ln_beta};
}

std::vector<const ag::Parameter*> AdapterLayer::parameters() const {
  return {&down_w, &down_b, &up_w, &up_b, &ln_gamma, &ln_beta};
}

std::size_t count_adapter_params(std::size_t d, std::size_t h, bool include_ln) {
  return 2 * h * d + d + h + (include_ln ? 2 * d : 0);
}

namespace {

void check_shapes(Eigen::Index h_cols, const AdapterLayer& layer) {
  const Eigen::Index d = layer.down_w.value.rows();
  const Eigen::Index h = layer.down_w.value.cols();
  if (h_cols != d || layer.up_w.value.rows() != h || layer.up_w.value.cols() != d ||
      layer.down_b.value.cols() != h || layer.up_b.value.cols() != d || layer.ln_gamma.value.cols() != d ||
      layer.ln_beta.value.cols() != d) {
    throw ContractError("adapter_forward: dimension mismatch");
  }
}

}  // namespace

ag::Mat adapter_forward(const ag::Mat& H, const AdapterLayer& layer) {
  check_shapes(H.cols(), layer);
  ag::Mat inner = H * layer.down_w.value;
  inner.rowwise() += layer.down_b.value.row(0);
  inner = inner.cwiseMax(0.0);
  ag::Mat branch = inner * layer.up_w.value;
  branch.rowwise() += layer.up_b.value.row(0);
  return ag::layer_norm_rows(branch + H, layer.ln_gamma.value, layer.ln_beta.value);
}

ag::Var adapter_forward(ag::Graph& g, ag::Var H, AdapterLayer& layer, bool trainable) {
  check_shapes(g.value(H).cols(), layer);
  ag::Var inner = g.add_row(g.matmul(H, g.param(layer.down_w, trainable)), g.param(layer.down_b, trainable));
  ag::Var branch = g.add_row(g.matmul(g.relu(inner), g.param(layer.up_w, trainable)), g.param(layer.up_b, trainable));
  return g.layer_norm(g.add(branch, H), g.param(layer.ln_gamma, trainable), g.param(layer.ln_beta, trainable));
}

}  // namespace toatod
