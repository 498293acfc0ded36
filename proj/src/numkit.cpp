#include "ppfl/numkit.hpp"

#include <algorithm>
#include <cmath>

namespace ppfl::numkit {

namespace {

std::size_t total_size(const std::vector<BlockShape>& shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += s.size();
  return n;
}

void check_same_size(const ParamVector& a, const ParamVector& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

ParamVector::ParamVector(std::vector<double> d) : data(std::move(d)) {
  shapes = {BlockShape{static_cast<int>(data.size()), 1}};
}

ParamVector::ParamVector(std::vector<double> d, std::vector<BlockShape> s)
    : data(std::move(d)), shapes(std::move(s)) {
  if (total_size(shapes) != data.size()) {
    throw ShapeError("ParamVector: block sizes sum to " + std::to_string(total_size(shapes)) +
                     " but data length is " + std::to_string(data.size()));
  }
}

ParamVector ParamVector::zeros(std::size_t n) {
  return ParamVector(std::vector<double>(n, 0.0));
}

ParamVector ParamVector::zeros_like(const ParamVector& other) {
  return ParamVector(std::vector<double>(other.size(), 0.0), other.shapes);
}

double ParamVector::norm() const {
  double s = 0.0;
  for (double x : data) s += x * x;
  return std::sqrt(s);
}

ParamVector& ParamVector::operator+=(const ParamVector& rhs) {
  check_same_size(*this, rhs, "add");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += rhs.data[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& rhs) {
  check_same_size(*this, rhs, "sub");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] -= rhs.data[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double k) {
  for (double& x : data) x *= k;
  return *this;
}

ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
ParamVector operator*(double k, ParamVector v) { return v *= k; }

double dot(const ParamVector& a, const ParamVector& b) {
  check_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

void ensure_finite(const ParamVector& v, const std::string& label) {
  for (double x : v.data) {
    if (!std::isfinite(x)) throw NumericError(label + ": non-finite entry");
  }
}

Matrix one_hot(const std::vector<int>& labels, int num_classes) {
  Matrix out(static_cast<int>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ParamError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
    out.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return out;
}

std::vector<BlockShape> ModelSpec::shapes() const {
  if (kind == ModelKind::SoftmaxRegression) {
    return {BlockShape{num_classes, input_dim}};
  }
  return {BlockShape{hidden_dim, input_dim}, BlockShape{hidden_dim, 1},
          BlockShape{num_classes, hidden_dim}, BlockShape{num_classes, 1}};
}

std::size_t ModelSpec::param_count() const { return total_size(shapes()); }

ParamVector ModelSpec::zero_params() const {
  return ParamVector(std::vector<double>(param_count(), 0.0), shapes());
}

namespace {

void check_model(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  if (spec.input_dim <= 0 || spec.num_classes <= 0 ||
      (spec.kind == ModelKind::MlpOneHidden && spec.hidden_dim <= 0)) {
    throw ShapeError("model: dimensions must be positive");
  }
  if (params.size() != spec.param_count()) {
    throw ShapeError("model: expected " + std::to_string(spec.param_count()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  if (batch.inputs.cols != spec.input_dim) {
    throw ShapeError("batch: input dim " + std::to_string(batch.inputs.cols) +
                     " does not match model input dim " + std::to_string(spec.input_dim));
  }
  if (batch.labels.cols != spec.num_classes || batch.labels.rows != batch.inputs.rows) {
    throw ShapeError("batch: label block must be batch x num_classes");
  }
  if (batch.inputs.rows <= 0) throw ShapeError("batch: empty");
  ensure_finite(params, "model parameters");
}

double activate(Activation a, double x) {
  return a == Activation::Tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

double activate_deriv(Activation a, double pre, double post) {
  return a == Activation::Tanh ? 1.0 - post * post : (pre > 0.0 ? 1.0 : 0.0);
}

// Forward pass for one input row.  Fills the logits; for the hidden-layer
// model also fills the pre-activations and activations.
void row_logits(const ModelSpec& spec, const ParamVector& params, const Matrix& inputs, int r,
                std::vector<double>& z, std::vector<double>* pre, std::vector<double>* act) {
  const int m = spec.input_dim;
  const int c = spec.num_classes;
  if (spec.kind == ModelKind::SoftmaxRegression) {
    for (int i = 0; i < c; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += params[static_cast<std::size_t>(i) * m + j] * inputs.at(r, j);
      z[i] = s;
    }
    return;
  }
  const int h = spec.hidden_dim;
  const std::size_t w1 = 0;
  const std::size_t b1 = w1 + static_cast<std::size_t>(h) * m;
  const std::size_t w2 = b1 + h;
  const std::size_t b2 = w2 + static_cast<std::size_t>(c) * h;
  std::vector<double> local_pre, local_act;
  std::vector<double>& p = pre ? *pre : local_pre;
  std::vector<double>& a = act ? *act : local_act;
  p.resize(h);
  a.resize(h);
  for (int i = 0; i < h; ++i) {
    double s = params[b1 + i];
    for (int j = 0; j < m; ++j) s += params[w1 + static_cast<std::size_t>(i) * m + j] * inputs.at(r, j);
    p[i] = s;
    a[i] = activate(spec.activation, s);
  }
  for (int i = 0; i < c; ++i) {
    double s = params[b2 + i];
    for (int j = 0; j < h; ++j) s += params[w2 + static_cast<std::size_t>(i) * h + j] * a[j];
    z[i] = s;
  }
}

// Replaces z with softmax(z) and returns log-sum-exp(z).
double softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return zmax + std::log(sum);
}

double loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                     ParamVector* grad) {
  check_model(spec, params, batch);
  const int n = batch.size();
  const int m = spec.input_dim;
  const int c = spec.num_classes;
  const int h = spec.hidden_dim;
  const std::size_t w1 = 0;
  const std::size_t b1 = w1 + static_cast<std::size_t>(h) * m;
  const std::size_t w2 = b1 + h;
  const std::size_t b2 = w2 + static_cast<std::size_t>(c) * h;

  double loss = 0.0;
  std::vector<double> z(c), pre, act, dz1;
  for (int r = 0; r < n; ++r) {
    row_logits(spec, params, batch.inputs, r, z, &pre, &act);
    double label_score = 0.0;
    for (int i = 0; i < c; ++i) label_score += batch.labels.at(r, i) * z[i];
    const double lse = softmax_inplace(z);
    loss += lse - label_score;

    if (!grad) continue;
    if (spec.kind == ModelKind::SoftmaxRegression) {
      for (int i = 0; i < c; ++i) {
        const double resid = (z[i] - batch.labels.at(r, i)) / n;
        for (int j = 0; j < m; ++j) {
          grad->data[static_cast<std::size_t>(i) * m + j] += resid * batch.inputs.at(r, j);
        }
      }
      continue;
    }
    dz1.assign(h, 0.0);
    for (int i = 0; i < c; ++i) {
      const double resid = (z[i] - batch.labels.at(r, i)) / n;
      grad->data[b2 + i] += resid;
      for (int j = 0; j < h; ++j) {
        grad->data[w2 + static_cast<std::size_t>(i) * h + j] += resid * act[j];
        dz1[j] += resid * params[w2 + static_cast<std::size_t>(i) * h + j];
      }
    }
    for (int i = 0; i < h; ++i) {
      const double d = dz1[i] * activate_deriv(spec.activation, pre[i], act[i]);
      grad->data[b1 + i] += d;
      for (int j = 0; j < m; ++j) grad->data[w1 + static_cast<std::size_t>(i) * m + j] += d * batch.inputs.at(r, j);
    }
  }
  return loss / n;
}

}  // namespace

double forward_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  return loss_and_grad(spec, params, batch, nullptr);
}

ParamVector backward(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  ParamVector grad(std::vector<double>(spec.param_count(), 0.0), spec.shapes());
  loss_and_grad(spec, params, batch, &grad);
  return grad;
}

std::vector<double> class_probabilities(const ModelSpec& spec, const ParamVector& params,
                                        const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != spec.input_dim) {
    throw ShapeError("class_probabilities: input length does not match model input dim");
  }
  Matrix row(1, spec.input_dim);
  for (int j = 0; j < spec.input_dim; ++j) row.at(0, j) = input[j];
  Batch probe;
  probe.inputs = row;
  probe.labels = Matrix(1, spec.num_classes);
  check_model(spec, params, probe);

  std::vector<double> z(spec.num_classes);
  row_logits(spec, params, row, 0, z, nullptr, nullptr);
  softmax_inplace(z);
  return z;
}

std::vector<int> predict_classes(const ModelSpec& spec, const ParamVector& params,
                                 const Matrix& inputs) {
  Batch probe;
  probe.inputs = inputs;
  probe.labels = Matrix(inputs.rows, spec.num_classes);
  check_model(spec, params, probe);

  std::vector<int> out(inputs.rows);
  std::vector<double> z(spec.num_classes);
  for (int r = 0; r < inputs.rows; ++r) {
    row_logits(spec, params, inputs, r, z, nullptr, nullptr);
    out[r] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

ParamVector clip_gradient(const ParamVector& g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ParamError("clip_gradient: clip norm must be positive");
  ensure_finite(g, "clip_gradient input");
  const double n = g.norm();
  if (n <= clip_norm) return g;
  ParamVector out = g;
  out *= clip_norm / n;
  return out;
}

AdamState AdamState::init(std::size_t dim) {
  AdamState s;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  return s;
}

AdamUpdate adam_step(const AdamState& state, const ParamVector& grad, double lr) {
  if (state.m.size() != grad.size()) {
    throw ShapeError("adam_step: state dimension does not match gradient");
  }
  ensure_finite(grad, "adam_step gradient");
  AdamUpdate out;
  out.state = state;
  out.state.step_count = state.step_count + 1;
  out.step = ParamVector::zeros_like(grad);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(out.state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(out.state.step_count));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    out.state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = out.state.m[i] / bc1;
    const double vhat = out.state.v[i] / bc2;
    out.step[i] = -lr * mhat / (std::sqrt(vhat) + state.epsilon);
  }
  return out;
}

ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f,
                             const ParamVector& x, double h) {
  if (!(h > 0.0)) throw ParamError("finite_diff_grad: step must be positive");
  ParamVector grad = ParamVector::zeros_like(x);
  ParamVector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite function value");
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace ppfl::numkit
