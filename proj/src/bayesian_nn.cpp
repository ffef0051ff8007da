#include "bnnswarm/bayesian_nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bnnswarm/errors.hpp"

namespace bnnswarm::nn {

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "sine" || name == "sin") return Activation::sine;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ArgumentError("bayesian_nn", "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sine: return "sine";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "identity";
}

double softplus(double rho) {
  if (rho > 30.0) return rho + std::log1p(std::exp(-rho));
  return std::log1p(std::exp(rho));
}

double softplus_grad(double rho) { return sigmoid(rho); }

double inverse_softplus(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("bayesian_nn", "inverse_softplus needs sigma > 0");
  if (sigma > 30.0) return sigma + std::log1p(-std::exp(-sigma));
  return std::log(std::expm1(sigma));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

BayesianLinear::BayesianLinear(int in, int out, Activation act, bool is_bayesian)
    : mu_w(RowMatrix::Zero(out, in)),
      rho_w(is_bayesian ? RowMatrix::Zero(out, in) : RowMatrix()),
      mu_b(Eigen::VectorXd::Zero(out)),
      rho_b(is_bayesian ? Eigen::VectorXd::Zero(out) : Eigen::VectorXd()),
      activation(act),
      bayesian(is_bayesian) {
  if (in <= 0 || out <= 0) throw ShapeError("layer dimensions must be positive");
}

BnnModel::BnnModel(std::vector<BayesianLinear> layers, double sine_omega, OutputTransform transform)
    : layers_(std::move(layers)), sine_omega_(sine_omega), transform_(transform) {
  validate();
}

void BnnModel::validate() const {
  if (layers_.empty()) throw ShapeError("model has no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.mu_b.size() != l.mu_w.rows()) throw ShapeError("bias length differs from layer output size");
    if (l.bayesian && (l.rho_w.rows() != l.mu_w.rows() || l.rho_w.cols() != l.mu_w.cols() ||
                       l.rho_b.size() != l.mu_b.size()))
      throw ShapeError("mu and rho shapes differ in layer " + std::to_string(k));
    if (k > 0 && layers_[k - 1].out() != l.in())
      throw ShapeError("layer " + std::to_string(k) + " input does not match previous output");
  }
}

BnnModel BnnModel::build(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim <= 0 || arch.output_dim <= 0) throw ShapeError("architecture dimensions must be positive");
  std::vector<int> sizes;
  sizes.push_back(arch.input_dim);
  sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
  sizes.push_back(arch.output_dim);

  std::mt19937_64 rng(seed);
  std::vector<BayesianLinear> layers;
  const std::size_t n_layers = sizes.size() - 1;
  for (std::size_t k = 0; k < n_layers; ++k) {
    Activation act = Activation::identity;
    if (k + 1 < n_layers) act = k == 0 ? arch.first_activation : arch.hidden_activation;
    BayesianLinear layer(sizes[k], sizes[k + 1], act, arch.bayesian);
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (Eigen::Index i = 0; i < layer.mu_w.size(); ++i) layer.mu_w.data()[i] = init(rng);
    for (Eigen::Index i = 0; i < layer.mu_b.size(); ++i) layer.mu_b[i] = init(rng);
    if (layer.bayesian) {
      layer.rho_w.setConstant(arch.rho_init);
      layer.rho_b.setConstant(arch.rho_init);
    }
    layers.push_back(std::move(layer));
  }
  return BnnModel(std::move(layers), arch.sine_omega, arch.output_transform);
}

int BnnModel::input_dim() const { return layers_.front().in(); }
int BnnModel::output_dim() const { return layers_.back().out(); }

std::size_t BnnModel::mu_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.mu_count();
  return n;
}

std::size_t BnnModel::rho_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.rho_count();
  return n;
}

ParamVector BnnModel::flatten() const {
  ParamVector p;
  p.mu.reserve(mu_count());
  p.rho.reserve(rho_count());
  for (const auto& l : layers_) {
    p.mu.insert(p.mu.end(), l.mu_w.data(), l.mu_w.data() + l.mu_w.size());
    p.mu.insert(p.mu.end(), l.mu_b.data(), l.mu_b.data() + l.mu_b.size());
    if (l.bayesian) {
      p.rho.insert(p.rho.end(), l.rho_w.data(), l.rho_w.data() + l.rho_w.size());
      p.rho.insert(p.rho.end(), l.rho_b.data(), l.rho_b.data() + l.rho_b.size());
    }
  }
  return p;
}

void BnnModel::unflatten(const ParamVector& p) {
  if (p.mu.size() != mu_count() || p.rho.size() != rho_count())
    throw ShapeError("parameter vector layout does not match the model");
  std::size_t m = 0;
  std::size_t r = 0;
  for (auto& l : layers_) {
    std::copy_n(p.mu.data() + m, l.mu_w.size(), l.mu_w.data());
    m += static_cast<std::size_t>(l.mu_w.size());
    std::copy_n(p.mu.data() + m, l.mu_b.size(), l.mu_b.data());
    m += static_cast<std::size_t>(l.mu_b.size());
    if (l.bayesian) {
      std::copy_n(p.rho.data() + r, l.rho_w.size(), l.rho_w.data());
      r += static_cast<std::size_t>(l.rho_w.size());
      std::copy_n(p.rho.data() + r, l.rho_b.size(), l.rho_b.data());
      r += static_cast<std::size_t>(l.rho_b.size());
    }
  }
}

void BnnModel::set_all_rho(double rho) {
  for (auto& l : layers_) {
    if (!l.bayesian) continue;
    l.rho_w.setConstant(rho);
    l.rho_b.setConstant(rho);
  }
}

void NoiseSource::fill(std::span<double> out) {
  for (auto& v : out) v = dist_(engine_);
}

std::vector<double> NoiseSource::draw(std::size_t n) {
  std::vector<double> v(n);
  fill(v);
  return v;
}

void ForwardTrace::clear() {
  eps.clear();
  weights.clear();
  biases.clear();
  inputs.clear();
  pre.clear();
  output.resize(0, 0);
}

namespace {

void activate(Activation a, double omega, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::identity: break;
    case Activation::sine: z = (z.array() * omega).sin().matrix(); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::relu: z = z.array().max(0.0).matrix(); break;
  }
}

// Multiplies `grad` in place by the activation derivative evaluated at `pre`.
void activation_backward(Activation a, double omega, const Eigen::MatrixXd& pre, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::identity: break;
    case Activation::sine: grad.array() *= omega * (pre.array() * omega).cos(); break;
    case Activation::tanh: grad.array() *= 1.0 - pre.array().tanh().square(); break;
    case Activation::relu: grad.array() *= (pre.array() > 0.0).cast<double>(); break;
  }
}

void sample_layer(const BayesianLinear& l, std::span<const double> eps, std::size_t& offset, RowMatrix& w,
                  Eigen::VectorXd& b) {
  if (!l.bayesian) {
    w = l.mu_w;
    b = l.mu_b;
    return;
  }
  const Eigen::Index nw = l.mu_w.size();
  const Eigen::Index nb = l.mu_b.size();
  Eigen::Map<const RowMatrix> ew(eps.data() + offset, l.out(), l.in());
  Eigen::Map<const Eigen::VectorXd> eb(eps.data() + offset + nw, nb);
  w = l.mu_w.array() + l.rho_w.unaryExpr([](double r) { return softplus(r); }).array() * ew.array();
  b = l.mu_b.array() + l.rho_b.unaryExpr([](double r) { return softplus(r); }).array() * eb.array();
  offset += static_cast<std::size_t>(nw + nb);
}

}  // namespace

Eigen::MatrixXd forward_batch(const BnnModel& model, const Eigen::MatrixXd& inputs, std::span<const double> eps,
                              ForwardTrace* trace) {
  if (inputs.rows() != model.input_dim())
    throw ShapeError("input has " + std::to_string(inputs.rows()) + " rows, model expects " +
                     std::to_string(model.input_dim()));
  if (eps.size() != model.rho_count())
    throw ShapeError("noise vector has " + std::to_string(eps.size()) + " entries, model needs " +
                     std::to_string(model.rho_count()));
  if (trace) {
    trace->clear();
    trace->eps.assign(eps.begin(), eps.end());
  }

  Eigen::MatrixXd a = inputs;
  std::size_t offset = 0;
  RowMatrix w;
  Eigen::VectorXd b;
  for (const auto& layer : model.layers()) {
    sample_layer(layer, eps, offset, w, b);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (trace) {
      trace->inputs.push_back(std::move(a));
      trace->pre.push_back(z);
      trace->weights.push_back(w);
      trace->biases.push_back(b);
    }
    activate(layer.activation, model.sine_omega(), z);
    a = std::move(z);
  }
  if (trace) trace->output = a;
  return a;
}

Eigen::MatrixXd forward_mean(const BnnModel& model, const Eigen::MatrixXd& inputs) {
  const std::vector<double> zeros(model.rho_count(), 0.0);
  return forward_batch(model, inputs, zeros);
}

Eigen::MatrixXd apply_output_transform(const BnnModel& model, Eigen::MatrixXd raw) {
  if (model.output_transform() == OutputTransform::sigmoid) raw = raw.unaryExpr([](double z) { return sigmoid(z); });
  return raw;
}

std::vector<double> forward_sample(const BnnModel& model, std::span<const double> x, std::span<const double> eps) {
  if (x.size() != static_cast<std::size_t>(model.input_dim()))
    throw ShapeError("input length " + std::to_string(x.size()) + " does not match model input " +
                     std::to_string(model.input_dim()));
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd out = apply_output_transform(model, forward_batch(model, in, eps));
  return {out.data(), out.data() + out.size()};
}

std::vector<double> forward_sample(const BnnModel& model, std::span<const double> x, NoiseSource& noise) {
  const auto eps = noise.draw(model.rho_count());
  return forward_sample(model, x, eps);
}

McPrediction predict_mc(const BnnModel& model, std::span<const double> x, int passes, NoiseSource& noise) {
  if (passes < 1) throw ArgumentError("bayesian_nn", "predict_mc needs at least one pass");
  const auto n_out = static_cast<std::size_t>(model.output_dim());
  std::vector<double> mean(n_out, 0.0);
  std::vector<double> m2(n_out, 0.0);
  for (int p = 0; p < passes; ++p) {
    const auto y = forward_sample(model, x, noise);
    for (std::size_t i = 0; i < n_out; ++i) {
      const double delta = y[i] - mean[i];
      mean[i] += delta / (p + 1);
      m2[i] += delta * (y[i] - mean[i]);
    }
  }
  McPrediction out{mean, std::vector<double>(n_out)};
  for (std::size_t i = 0; i < n_out; ++i) out.std[i] = std::sqrt(std::max(0.0, m2[i] / passes));
  return out;
}

double bce_from_logits(const Eigen::MatrixXd& logits, std::span<const double> labels, Eigen::MatrixXd* grad_output) {
  if (labels.empty()) throw ArgumentError("bayesian_nn", "BCE needs a non-empty batch");
  if (logits.rows() != 1 || static_cast<std::size_t>(logits.cols()) != labels.size())
    throw ShapeError("BCE expects a 1 x n logit row matching the labels");
  const auto n = static_cast<double>(labels.size());
  if (grad_output) grad_output->setZero(1, logits.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    const double p_raw = sigmoid(logits(0, i));
    const double p = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    // The clamp has zero derivative outside [eps, 1 - eps].
    if (grad_output && p == p_raw) (*grad_output)(0, i) = (p - y) / n;
  }
  return sum / n;
}

double bce_loss(const BnnModel& model, const LabeledBatch& batch, std::span<const double> eps, ForwardTrace* trace,
                Eigen::MatrixXd* grad_output) {
  if (batch.size() == 0) throw ArgumentError("bayesian_nn", "BCE needs a non-empty batch");
  if (static_cast<std::size_t>(batch.inputs.cols()) != batch.size())
    throw ShapeError("batch input count differs from label count");
  for (double y : batch.labels)
    if (y != 0.0 && y != 1.0) throw ArgumentError("bayesian_nn", "labels must be 0 or 1");
  const Eigen::MatrixXd logits = forward_batch(model, batch.inputs, eps, trace);
  return bce_from_logits(logits, batch.labels, grad_output);
}

double bce_loss(const BnnModel& model, const LabeledBatch& batch, NoiseSource& noise) {
  const auto eps = noise.draw(model.rho_count());
  return bce_loss(model, batch, eps, nullptr, nullptr);
}

ParamVector backward(const BnnModel& model, const ForwardTrace& trace, const Eigen::MatrixXd& grad_output) {
  if (!trace.recorded()) throw StateError("bayesian_nn", "backward called before a recorded forward pass");
  const auto& layers = model.layers();
  if (trace.inputs.size() != layers.size()) throw StateError("bayesian_nn", "trace does not belong to this model");
  if (grad_output.rows() != trace.output.rows() || grad_output.cols() != trace.output.cols())
    throw ShapeError("output gradient shape differs from the recorded output");

  ParamVector grad(model.mu_count(), model.rho_count());
  // Parameter offsets of each layer, needed because we walk layers backwards.
  std::vector<std::size_t> mu_off(layers.size());
  std::vector<std::size_t> rho_off(layers.size());
  {
    std::size_t m = 0;
    std::size_t r = 0;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      mu_off[k] = m;
      rho_off[k] = r;
      m += layers[k].mu_count();
      r += layers[k].rho_count();
    }
  }

  Eigen::MatrixXd g = grad_output;
  for (std::size_t kk = layers.size(); kk-- > 0;) {
    const auto& layer = layers[kk];
    activation_backward(layer.activation, model.sine_omega(), trace.pre[kk], g);
    const RowMatrix dw = g * trace.inputs[kk].transpose();
    const Eigen::VectorXd db = g.rowwise().sum();

    double* gm = grad.mu.data() + mu_off[kk];
    Eigen::Map<RowMatrix>(gm, layer.out(), layer.in()) = dw;
    Eigen::Map<Eigen::VectorXd>(gm + dw.size(), layer.out()) = db;

    if (layer.bayesian) {
      // dw/drho = eps * softplus'(rho)
      const double* e = trace.eps.data() + rho_off[kk];
      Eigen::Map<const RowMatrix> ew(e, layer.out(), layer.in());
      Eigen::Map<const Eigen::VectorXd> eb(e + dw.size(), layer.out());
      double* gr = grad.rho.data() + rho_off[kk];
      Eigen::Map<RowMatrix>(gr, layer.out(), layer.in()) =
          dw.array() * ew.array() * layer.rho_w.unaryExpr([](double r) { return softplus_grad(r); }).array();
      Eigen::Map<Eigen::VectorXd>(gr + dw.size(), layer.out()) =
          db.array() * eb.array() * layer.rho_b.unaryExpr([](double r) { return softplus_grad(r); }).array();
    }
    if (kk > 0) g = trace.weights[kk].transpose() * g;
  }
  return grad;
}

}  // namespace bnnswarm::nn
