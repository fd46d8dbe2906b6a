#include "ctedd/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "ctedd/rng.hpp"

namespace ctedd {

namespace {

double softplus(double z) {
  // log(1 + e^z), stable for large |z|
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Mat map(const Mat& x, double (*f)(double)) {
  Mat out = x;
  for (double& v : out.data()) v = f(v);
  return out;
}

Mat affine(const Mat& x, const Mat& w, const Mat& b, const std::string& layer) {
  if (x.cols() != w.cols()) {
    throw DimensionError("layer '" + layer + "': input " + x.shape_string() + " does not match weight " +
                         w.shape_string());
  }
  Mat y = matmul_nt(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
  }
  return y;
}

Mat clamp(const Mat& x, double lo, double hi) {
  Mat out = x;
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return out;
}

template <typename Sink>
Mat run_forward(const ParamStore& params, const LayerStack& layers, const Mat& x, Sink&& sink) {
  Mat h = x;
  for (const LayerSpec& layer : layers) {
    const std::string wname = layer.name + ".W";
    const std::string bname = layer.name + ".b";
    if (!params.contains(wname) || !params.contains(bname)) {
      throw StructureError("layer '" + layer.name + "' has no parameters in store");
    }
    const Mat& w = params.value(wname);
    const Mat& b = params.value(bname);
    if (b.rows() != 1 || b.cols() != w.rows()) {
      throw DimensionError("layer '" + layer.name + "': bias " + b.shape_string() + " vs weight " +
                           w.shape_string());
    }
    Mat pre = affine(h, w, b, layer.name);
    sink(TapeOp{OpKind::kMatmul, wname, h, Mat{}});
    sink(TapeOp{OpKind::kAddBias, bname, Mat{}, Mat{}});
    switch (layer.activation) {
      case Activation::kLinear:
        h = std::move(pre);
        break;
      case Activation::kRelu:
        h = map(pre, [](double v) { return v > 0.0 ? v : 0.0; });
        sink(TapeOp{OpKind::kRelu, {}, std::move(pre), Mat{}});
        break;
      case Activation::kTanh:
        h = map(pre, [](double v) { return std::tanh(v); });
        sink(TapeOp{OpKind::kTanh, {}, Mat{}, h});
        break;
      case Activation::kSoftplus:
        h = map(pre, softplus);
        sink(TapeOp{OpKind::kSoftplus, {}, std::move(pre), Mat{}});
        break;
      case Activation::kBoundedSoftplus: {
        Mat sp = map(pre, softplus);
        h = clamp(sp, kSigmaMin, kSigmaMax);
        sink(TapeOp{OpKind::kSoftplus, {}, std::move(pre), Mat{}});
        sink(TapeOp{OpKind::kClamp, {}, std::move(sp), Mat{}, kSigmaMin, kSigmaMax});
        break;
      }
    }
    debug_check_finite(h, layer.name.c_str());
  }
  return h;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
    case Activation::kBoundedSoftplus: return "bounded_softplus";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  for (Activation a : {Activation::kLinear, Activation::kRelu, Activation::kTanh, Activation::kSoftplus,
                       Activation::kBoundedSoftplus}) {
    if (name == activation_name(a)) return a;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

MlpOutput forward_mlp(const ParamStore& params, const LayerStack& layers, const Mat& x) {
  require_finite(x, "forward_mlp input");
  MlpOutput out;
  out.y = run_forward(params, layers, x, [&](TapeOp op) { out.tape.record(std::move(op)); });
  return out;
}

Mat evaluate_mlp(const ParamStore& params, const LayerStack& layers, const Mat& x) {
  return run_forward(params, layers, x, [](TapeOp&&) {});
}

namespace {

template <bool kAccumulate, typename Store>
Mat run_backward(const Tape& tape, const Mat& dy, Store& params) {
  Mat g = dy;
  const auto& ops = tape.ops();
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    const TapeOp& op = *it;
    switch (op.kind) {
      case OpKind::kAddBias: {
        if (!params.contains(op.param)) throw StructureError("backward: tape references unknown '" + op.param + "'");
        if (params.value(op.param).cols() != g.cols()) {
          throw StructureError("backward: bias '" + op.param + "' shape mismatch");
        }
        if constexpr (kAccumulate) {
          Mat& gb = params.grad(op.param);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            const auto row = g.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) gb(0, c) += row[c];
          }
        }
        break;
      }
      case OpKind::kMatmul: {
        if (!params.contains(op.param)) throw StructureError("backward: tape references unknown '" + op.param + "'");
        auto& e = params.entry(op.param);
        if (e.value.rows() != g.cols() || e.value.cols() != op.input.cols()) {
          throw StructureError("backward: weight '" + op.param + "' shape mismatch");
        }
        if constexpr (kAccumulate) add_inplace(e.grad, matmul_tn(g, op.input));
        g = matmul(g, e.value);
        break;
      }
      case OpKind::kRelu: {
        auto gd = g.data();
        const auto pre = op.input.data();
        for (std::size_t i = 0; i < gd.size(); ++i) {
          if (!(pre[i] > 0.0)) gd[i] = 0.0;
        }
        break;
      }
      case OpKind::kTanh: {
        auto gd = g.data();
        const auto y = op.output.data();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= 1.0 - y[i] * y[i];
        break;
      }
      case OpKind::kSoftplus: {
        auto gd = g.data();
        const auto pre = op.input.data();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= sigmoid(pre[i]);
        break;
      }
      case OpKind::kClamp: {
        auto gd = g.data();
        const auto in = op.input.data();
        for (std::size_t i = 0; i < gd.size(); ++i) {
          if (in[i] < op.lo || in[i] > op.hi) gd[i] = 0.0;
        }
        break;
      }
    }
    debug_check_finite(g, "backward");
  }
  return g;
}

}  // namespace

Mat backward(const Tape& tape, const Mat& dy, ParamStore& params) {
  return run_backward<true>(tape, dy, params);
}

Mat backward_input(const Tape& tape, const Mat& dy, const ParamStore& params) {
  return run_backward<false>(tape, dy, params);
}

void init_mlp(ParamStore& params, const LayerStack& layers, const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() != layers.size() + 1) {
    throw DimensionError("init_mlp: need " + std::to_string(layers.size() + 1) + " dims");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    Mat w(fan_out, fan_in);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    params.add(layers[l].name + ".W", std::move(w));
    params.add(layers[l].name + ".b", Mat(1, fan_out));
  }
}

}  // namespace ctedd
