#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ppfl/errors.hpp"

namespace ppfl::numkit {

struct BlockShape {
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  bool operator==(const BlockShape&) const = default;
};

// Flat float64 parameter vector with the block structure of the model it
// parameterizes.  Invariant: the block sizes sum to data.size().
struct ParamVector {
  std::vector<double> data;
  std::vector<BlockShape> shapes;

  ParamVector() = default;
  explicit ParamVector(std::vector<double> d);
  ParamVector(std::vector<double> d, std::vector<BlockShape> s);
  static ParamVector zeros(std::size_t n);
  static ParamVector zeros_like(const ParamVector& other);

  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double norm() const;

  ParamVector& operator+=(const ParamVector& rhs);
  ParamVector& operator-=(const ParamVector& rhs);
  ParamVector& operator*=(double k);
};

ParamVector operator+(ParamVector lhs, const ParamVector& rhs);
ParamVector operator-(ParamVector lhs, const ParamVector& rhs);
ParamVector operator*(double k, ParamVector v);
double dot(const ParamVector& a, const ParamVector& b);

// Throws NumericError when any entry is not finite.
void ensure_finite(const ParamVector& v, const std::string& label);

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// A training batch: inputs are batch x input_dim, labels are one-hot rows.
struct Batch {
  Matrix inputs;
  Matrix labels;
  int size() const { return inputs.rows; }
};

Matrix one_hot(const std::vector<int>& labels, int num_classes);

enum class ModelKind { SoftmaxRegression, MlpOneHidden };
enum class Activation { Tanh, Relu };

struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxRegression;
  int input_dim = 0;
  int hidden_dim = 0;  // ignored for softmax regression
  int num_classes = 0;
  Activation activation = Activation::Tanh;

  std::vector<BlockShape> shapes() const;
  std::size_t param_count() const;
  ParamVector zero_params() const;
};

// Mean cross-entropy of the batch under the model.  Softmax regression scores
// with logits Wx; the one-hidden-layer net applies the activation between its
// two affine maps.
double forward_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Analytic gradient of forward_loss with respect to the parameters.
ParamVector backward(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Class probabilities for a single input row; used by the attack module.
std::vector<double> class_probabilities(const ModelSpec& spec, const ParamVector& params,
                                        const std::vector<double>& input);

std::vector<int> predict_classes(const ModelSpec& spec, const ParamVector& params,
                                 const Matrix& inputs);

// Radial clipping: g when ||g|| <= c, otherwise g * c/||g||.
ParamVector clip_gradient(const ParamVector& g, double clip_norm);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState init(std::size_t dim);
};

struct AdamUpdate {
  AdamState state;
  ParamVector step;  // additive: params + step applies the update
};

// Bias-corrected Adam.  The returned step is -lr * m_hat / (sqrt(v_hat) + eps).
AdamUpdate adam_step(const AdamState& state, const ParamVector& grad, double lr);

// Central differences, one coordinate at a time.
ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f,
                             const ParamVector& x, double h);

}  // namespace ppfl::numkit
