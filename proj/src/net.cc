#include "mmrl/net.h"

#include <Eigen/QR>

#include <cmath>
#include <random>

namespace mmrl {
namespace {

using ConstMatMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;

Eigen::Index next_offset(const std::vector<ParamBlock>& blocks) {
  return blocks.empty() ? 0 : blocks.back().offset + blocks.back().size();
}

// Orthogonal matrix of shape rows x cols scaled by `gain`.
MatrixXd orthogonal(int rows, int cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(big, small);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  MatrixXd w = rows >= cols ? q : MatrixXd(q.transpose());
  return gain * w;
}

}  // namespace

Mlp::Mlp(MlpSpec spec, OutputActivation output, const std::string& name,
         std::vector<ParamBlock>* blocks)
    : spec_(std::move(spec)), output_(output) {
  if (spec_.input_dim < 1 || spec_.output_dim < 1)
    throw std::invalid_argument("MLP dimensions must be >= 1");
  std::vector<int> dims = {spec_.input_dim};
  for (int h : spec_.hidden) {
    if (h < 1) throw std::invalid_argument("hidden width must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(spec_.output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w_offset = next_offset(*blocks);
    blocks->push_back({name + ".w" + std::to_string(l), layer.w_offset,
                       layer.out, layer.in});
    layer.b_offset = next_offset(*blocks);
    blocks->push_back(
        {name + ".b" + std::to_string(l), layer.b_offset, layer.out, 1});
    layers_.push_back(layer);
  }
}

Eigen::Index Mlp::param_count() const {
  Eigen::Index n = 0;
  for (const Layer& l : layers_) n += l.out * (l.in + 1);
  return n;
}

void Mlp::forward(const VectorXd& params, const MatrixXd& x,
                  MlpTape* tape) const {
  if (x.rows() != spec_.input_dim)
    throw std::invalid_argument("MLP input has " + std::to_string(x.rows()) +
                                " rows, expected " +
                                std::to_string(spec_.input_dim));
  tape->activations.resize(layers_.size() + 1);
  tape->activations[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ConstMatMap w(params.data() + layer.w_offset, layer.out, layer.in);
    ConstVecMap b(params.data() + layer.b_offset, layer.out);
    MatrixXd z = w * tape->activations[l];
    z.colwise() += b;
    bool last = l + 1 == layers_.size();
    if (!last || output_ == OutputActivation::kTanh) z = z.array().tanh();
    tape->activations[l + 1] = std::move(z);
  }
}

VectorXd Mlp::forward(const VectorXd& params, const VectorXd& x) const {
  if (x.size() != spec_.input_dim)
    throw std::invalid_argument("MLP input has " + std::to_string(x.size()) +
                                " entries, expected " +
                                std::to_string(spec_.input_dim));
  VectorXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ConstMatMap w(params.data() + layer.w_offset, layer.out, layer.in);
    ConstVecMap b(params.data() + layer.b_offset, layer.out);
    VectorXd z = w * a + b;
    bool last = l + 1 == layers_.size();
    if (!last || output_ == OutputActivation::kTanh) z = z.array().tanh();
    a = std::move(z);
  }
  return a;
}

MatrixXd Mlp::backward(const VectorXd& params, const MlpTape& tape,
                       const MatrixXd& d_output, VectorXd* grad) const {
  MatrixXd delta = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const MatrixXd& out = tape.activations[l + 1];
    bool last = l + 1 == layers_.size();
    if (!last || output_ == OutputActivation::kTanh)
      delta.array() *= 1.0 - out.array().square();
    const MatrixXd& in = tape.activations[l];
    Eigen::Map<MatrixXd> gw(grad->data() + layer.w_offset, layer.out,
                            layer.in);
    Eigen::Map<VectorXd> gb(grad->data() + layer.b_offset, layer.out);
    gw.noalias() += delta * in.transpose();
    gb += delta.rowwise().sum();
    ConstMatMap w(params.data() + layer.w_offset, layer.out, layer.in);
    delta = w.transpose() * delta;
  }
  return delta;
}

void Mlp::initialize(VectorXd* params, std::uint64_t seed,
                     double output_gain) const {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    bool last = l + 1 == layers_.size();
    MatrixXd w = orthogonal(layer.out, layer.in,
                            last ? output_gain : std::sqrt(2.0), rng);
    Eigen::Map<MatrixXd>(params->data() + layer.w_offset, layer.out,
                         layer.in) = w;
    params->segment(layer.b_offset, layer.out).setZero();
  }
}

ActorCritic::ActorCritic(int obs_dim, int act_dim, std::vector<int> hidden)
    : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(std::move(hidden)) {
  policy_ = Mlp({obs_dim_, hidden_, act_dim_}, OutputActivation::kTanh,
                "policy", &blocks_);
  value_ = Mlp({obs_dim_, hidden_, 1}, OutputActivation::kLinear, "value",
               &blocks_);
  log_std_offset_ = next_offset(blocks_);
  blocks_.push_back({"log_std", log_std_offset_, act_dim_, 1});
  params_ = VectorXd::Zero(next_offset(blocks_));
}

void ActorCritic::initialize(std::uint64_t seed, double log_std_init) {
  policy_.initialize(&params_, derive_seed(seed, 0), 0.01);
  value_.initialize(&params_, derive_seed(seed, 1), 1.0);
  params_.segment(log_std_offset_, act_dim_).setConstant(log_std_init);
  clamp_log_std();
}

PolicyOutput ActorCritic::forward_policy(const VectorXd& obs) const {
  return {policy_.forward(params_, obs), log_std()};
}

double ActorCritic::forward_value(const VectorXd& obs) const {
  return value_.forward(params_, obs)[0];
}

void ActorCritic::clamp_log_std() {
  auto s = params_.segment(log_std_offset_, act_dim_);
  s = s.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

double log_prob(const VectorXd& mean, const VectorXd& log_std,
                const VectorXd& action) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * kPi);
  double total = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    total += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return total;
}

double gaussian_entropy(const VectorXd& log_std) {
  static const double kHalfLog2PiE = 0.5 * std::log(2.0 * kPi * std::exp(1.0));
  return log_std.sum() + kHalfLog2PiE * static_cast<double>(log_std.size());
}

AdamState AdamState::zeros(Eigen::Index n, double learning_rate) {
  AdamState s;
  s.m = VectorXd::Zero(n);
  s.v = VectorXd::Zero(n);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(VectorXd* params, const VectorXd& grad, AdamState* state,
               const std::vector<ParamBlock>& blocks) {
  if (grad.size() != params->size() || state->m.size() != params->size())
    throw std::invalid_argument("adam_step: shape mismatch");
  for (const ParamBlock& b : blocks) {
    if (!grad.segment(b.offset, b.size()).allFinite())
      throw NonFiniteError("non-finite gradient in parameter block " + b.name);
  }
  state->step += 1;
  const double t = static_cast<double>(state->step);
  const double c1 = 1.0 - std::pow(state->beta1, t);
  const double c2 = 1.0 - std::pow(state->beta2, t);
  state->m = state->beta1 * state->m + (1.0 - state->beta1) * grad;
  state->v = state->beta2 * state->v +
             (1.0 - state->beta2) * grad.cwiseProduct(grad);
  *params -= (state->learning_rate * (state->m / c1).array() /
              ((state->v / c2).array().sqrt() + state->eps))
                 .matrix();
}

}  // namespace mmrl
