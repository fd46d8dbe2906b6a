#pragma once

#include <string>
#include <vector>

#include "ctedd/mat.hpp"
#include "ctedd/param_store.hpp"

namespace ctedd {

class Rng;

enum class Activation {
  kLinear,
  kRelu,
  kTanh,
  kSoftplus,
  // softplus clamped to [kSigmaMin, kSigmaMax]; used by standard-deviation heads
  kBoundedSoftplus,
};

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 1.0;

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

// One affine layer followed by an activation. Parameters live in the store
// under "<name>.W" (out x in) and "<name>.b" (1 x out).
struct LayerSpec {
  std::string name;
  Activation activation;
};
using LayerStack = std::vector<LayerSpec>;

enum class OpKind { kMatmul, kAddBias, kRelu, kTanh, kSoftplus, kClamp };

struct TapeOp {
  OpKind kind;
  std::string param;  // empty for parameter-free ops
  Mat input;
  Mat output;
  double lo = 0.0;  // clamp bounds
  double hi = 0.0;
};

// Primitive ops recorded by a forward pass, replayed in reverse by backward.
class Tape {
 public:
  void record(TapeOp op) { ops_.push_back(std::move(op)); }
  const std::vector<TapeOp>& ops() const { return ops_; }
  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }

 private:
  std::vector<TapeOp> ops_;
};

struct MlpOutput {
  Mat y;
  Tape tape;
};

MlpOutput forward_mlp(const ParamStore& params, const LayerStack& layers, const Mat& x);

// Forward pass without recording a tape.
Mat evaluate_mlp(const ParamStore& params, const LayerStack& layers, const Mat& x);

// Accumulates d(sum(dy .* y))/d(param) into params' grad buffers and returns
// the gradient with respect to the network input.
Mat backward(const Tape& tape, const Mat& dy, ParamStore& params);

// Input gradient only; parameter gradients are not touched.
Mat backward_input(const Tape& tape, const Mat& dy, const ParamStore& params);

// Adds "<name>.W" ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) and zero "<name>.b" for
// every layer. dims = {input, hidden..., output}, one more than layers.
void init_mlp(ParamStore& params, const LayerStack& layers, const std::vector<std::size_t>& dims, Rng& rng);

}  // namespace ctedd
