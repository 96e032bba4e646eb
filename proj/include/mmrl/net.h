#ifndef MMRL_NET_H_
#define MMRL_NET_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmrl/core.h"

namespace mmrl {

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden = {64, 64};
  int output_dim = 1;
};

// A named slice of the flat parameter vector. Matrices are column-major
// (rows = fan-out, cols = fan-in).
struct ParamBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;
  Eigen::Index size() const { return rows * cols; }
};

// Activations recorded by a batch forward pass; one column per sample.
// activations[0] is the input, activations.back() the output.
struct MlpTape {
  std::vector<MatrixXd> activations;
  const MatrixXd& output() const { return activations.back(); }
};

enum class OutputActivation { kTanh, kLinear };

// tanh MLP whose weights live in an external flat vector.
class Mlp {
 public:
  Mlp() = default;
  // Appends this network's blocks (prefixed by `name`) to `blocks`,
  // starting at the end of the last existing block.
  Mlp(MlpSpec spec, OutputActivation output, const std::string& name,
      std::vector<ParamBlock>* blocks);

  const MlpSpec& spec() const { return spec_; }
  Eigen::Index param_count() const;

  // X: input_dim x N.
  void forward(const VectorXd& params, const MatrixXd& x, MlpTape* tape) const;
  VectorXd forward(const VectorXd& params, const VectorXd& x) const;

  // Reverse pass for the recorded tape. Adds dL/dparams to `grad` given
  // dL/doutput (output_dim x N). Returns dL/dinput.
  MatrixXd backward(const VectorXd& params, const MlpTape& tape,
                    const MatrixXd& d_output, VectorXd* grad) const;

  // Orthogonal init: hidden layers with gain sqrt(2), output layer with
  // `output_gain`; biases zero.
  void initialize(VectorXd* params, std::uint64_t seed,
                  double output_gain) const;

 private:
  struct Layer {
    Eigen::Index w_offset, b_offset;
    int in, out;
  };

  MlpSpec spec_;
  OutputActivation output_ = OutputActivation::kLinear;
  std::vector<Layer> layers_;
};

struct PolicyOutput {
  VectorXd mean;
  VectorXd log_std;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

// Gaussian policy (tanh-squashed mean, state-independent log-std) plus a
// value network. All learnable values share one flat vector.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int obs_dim, int act_dim, std::vector<int> hidden = {64, 64});

  void initialize(std::uint64_t seed, double log_std_init = -0.5);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const Mlp& policy_net() const { return policy_; }
  const Mlp& value_net() const { return value_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }
  Eigen::Index log_std_offset() const { return log_std_offset_; }
  VectorXd log_std() const { return params_.segment(log_std_offset_, act_dim_); }

  // Throws std::invalid_argument on a dimension mismatch.
  PolicyOutput forward_policy(const VectorXd& obs) const;
  double forward_value(const VectorXd& obs) const;

  // Keeps log_std inside [kLogStdMin, kLogStdMax].
  void clamp_log_std();

 private:
  int obs_dim_ = 0;
  int act_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<ParamBlock> blocks_;
  Mlp policy_;
  Mlp value_;
  Eigen::Index log_std_offset_ = 0;
  VectorXd params_;
};

// Diagonal Gaussian log-density.
double log_prob(const VectorXd& mean, const VectorXd& log_std,
                const VectorXd& action);
// Differential entropy of the diagonal Gaussian.
double gaussian_entropy(const VectorXd& log_std);

struct AdamState {
  VectorXd m;
  VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double learning_rate = 5e-5;

  static AdamState zeros(Eigen::Index n, double learning_rate);
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bias-corrected Adam update in place. Throws NonFiniteError naming the
// first block with a non-finite gradient; nothing is modified in that case.
void adam_step(VectorXd* params, const VectorXd& grad, AdamState* state,
               const std::vector<ParamBlock>& blocks);

}  // namespace mmrl

#endif  // MMRL_NET_H_
