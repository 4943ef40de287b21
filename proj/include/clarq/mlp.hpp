#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarq/encoder.hpp"

namespace clarq {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
  bool relu = false;
};

// Feed-forward network of dense layers. Hidden layers use ReLU; the output
// layer's activation is per-network (identity unless `relu_output`).
class Mlp {
 public:
  // Activations recorded by forward() for backward().
  struct Trace {
    std::vector<Vector> inputs;  // input of each layer
    std::vector<Vector> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  Mlp(std::string name, std::vector<DenseLayer> layers);

  // widths = {input, hidden..., output}; weights and biases drawn uniformly
  // from [-init_range, init_range].
  static Mlp create(std::string name, const std::vector<std::size_t>& widths,
                    bool relu_output, std::mt19937_64& rng, double init_range = 0.05);

  const std::string& name() const { return name_; }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Throws UsageError on input-size mismatch, NumericError naming the layer
  // when a non-finite activation appears.
  Vector forward(std::span<const double> x, Trace* trace = nullptr) const;

  // Accumulates parameter gradients into `grad` (same shape) and returns
  // dLoss/dInput.
  Vector backward(const Trace& trace, std::span<const double> dout, Mlp& grad) const;

  // Same shape, all parameters zero.
  Mlp zeros_like() const;
  void set_zero();
  std::size_t parameter_count() const;
  // Mutable views of every parameter tensor, weights then bias per layer.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  nlohmann::json to_json() const;
  static Mlp from_json(const std::string& name, const nlohmann::json& j);

  bool operator==(const Mlp& other) const;

 private:
  std::string name_;
  std::vector<DenseLayer> layers_;
};

}  // namespace clarq
