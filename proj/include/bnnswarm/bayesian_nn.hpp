#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bnnswarm/param_vector.hpp"

namespace bnnswarm::nn {

// Weights are stored row-major so that flatten() is a straight copy.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { identity, sine, tanh, relu };
enum class OutputTransform { identity, sigmoid };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// sigma = softplus(rho) = ln(1 + e^rho); strictly positive for finite rho.
double softplus(double rho);
// d softplus / d rho, i.e. the logistic sigmoid.
double softplus_grad(double rho);
double inverse_softplus(double sigma);
double sigmoid(double z);

// One linear layer with a Gaussian posterior per weight and bias. A
// non-Bayesian layer keeps only the means and carries no rho parameters.
struct BayesianLinear {
  RowMatrix mu_w;
  RowMatrix rho_w;
  Eigen::VectorXd mu_b;
  Eigen::VectorXd rho_b;
  Activation activation = Activation::identity;
  bool bayesian = true;

  BayesianLinear() = default;
  BayesianLinear(int in, int out, Activation act, bool is_bayesian = true);

  int in() const { return static_cast<int>(mu_w.cols()); }
  int out() const { return static_cast<int>(mu_w.rows()); }
  std::size_t mu_count() const { return static_cast<std::size_t>(mu_w.size() + mu_b.size()); }
  std::size_t rho_count() const { return bayesian ? mu_count() : 0; }
};

// Network shape as read from the experiment config.
struct Architecture {
  int input_dim = 2;
  std::vector<int> hidden = {64, 64, 64};
  int output_dim = 1;
  Activation first_activation = Activation::sine;
  Activation hidden_activation = Activation::tanh;
  double sine_omega = 30.0;
  bool bayesian = true;
  double rho_init = -5.0;
  OutputTransform output_transform = OutputTransform::sigmoid;
};

class BnnModel {
 public:
  BnnModel() = default;
  BnnModel(std::vector<BayesianLinear> layers, double sine_omega = 1.0,
           OutputTransform transform = OutputTransform::sigmoid);

  // mu ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), rho = arch.rho_init.
  static BnnModel build(const Architecture& arch, std::uint64_t seed);

  const std::vector<BayesianLinear>& layers() const { return layers_; }
  std::vector<BayesianLinear>& layers() { return layers_; }
  double sine_omega() const { return sine_omega_; }
  OutputTransform output_transform() const { return transform_; }
  void set_output_transform(OutputTransform t) { transform_ = t; }

  int input_dim() const;
  int output_dim() const;
  std::size_t mu_count() const;
  std::size_t rho_count() const;

  ParamVector flatten() const;
  void unflatten(const ParamVector& params);
  void set_all_rho(double rho);

 private:
  void validate() const;

  std::vector<BayesianLinear> layers_;
  double sine_omega_ = 1.0;
  OutputTransform transform_ = OutputTransform::sigmoid;
};

// Standard-normal stream for the reparameterisation noise. One per node;
// identical seeds give identical sequences.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double next() { return dist_(engine_); }
  void fill(std::span<double> out);
  std::vector<double> draw(std::size_t n);
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

// Everything a backward pass needs: the noise used, the sampled weights,
// and the per-layer inputs and pre-activations. Columns are batch entries.
struct ForwardTrace {
  std::vector<double> eps;
  std::vector<RowMatrix> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
  Eigen::MatrixXd output;

  bool recorded() const { return !inputs.empty(); }
  void clear();
};

// Inputs (input_dim x n) with binary labels.
struct LabeledBatch {
  Eigen::MatrixXd inputs;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
};

// Raw network output (before output_transform) for a batch of column
// inputs, with Bayesian weights sampled as w = mu + softplus(rho) * eps.
// `eps` must hold model.rho_count() values laid out like the rho section.
Eigen::MatrixXd forward_batch(const BnnModel& model, const Eigen::MatrixXd& inputs,
                              std::span<const double> eps, ForwardTrace* trace = nullptr);

// Forward pass using only the means (no noise).
Eigen::MatrixXd forward_mean(const BnnModel& model, const Eigen::MatrixXd& inputs);

Eigen::MatrixXd apply_output_transform(const BnnModel& model, Eigen::MatrixXd raw);

// One stochastic pass for a single input, output_transform applied.
std::vector<double> forward_sample(const BnnModel& model, std::span<const double> x, NoiseSource& noise);
std::vector<double> forward_sample(const BnnModel& model, std::span<const double> x,
                                   std::span<const double> eps);

struct McPrediction {
  std::vector<double> mean;
  std::vector<double> std;
};

// Mean and population std of `passes` independent samples.
McPrediction predict_mc(const BnnModel& model, std::span<const double> x, int passes, NoiseSource& noise);

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy treating the single raw output as a logit.
// With `grad_output` set, also writes dL/d(raw output) (1 x n).
double bce_from_logits(const Eigen::MatrixXd& logits, std::span<const double> labels,
                       Eigen::MatrixXd* grad_output = nullptr);

// BCE of one stochastic pass (a single weight sample shared by the batch).
double bce_loss(const BnnModel& model, const LabeledBatch& batch, NoiseSource& noise);

// BCE with given noise; optionally records the trace for backward().
double bce_loss(const BnnModel& model, const LabeledBatch& batch, std::span<const double> eps,
                ForwardTrace* trace, Eigen::MatrixXd* grad_output);

// Exact gradient of a scalar loss with respect to every mu and rho, given
// the recorded trace and dL/d(raw output). Throws StateError without a trace.
ParamVector backward(const BnnModel& model, const ForwardTrace& trace, const Eigen::MatrixXd& grad_output);

}  // namespace bnnswarm::nn
