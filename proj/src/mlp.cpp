#include "clarq/mlp.hpp"

#include <cmath>

#include "clarq/errors.hpp"

namespace clarq {

using nlohmann::json;

Mlp::Mlp(std::string name, std::vector<DenseLayer> layers)
    : name_(std::move(name)), layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weights.size() != l.in * l.out || l.bias.size() != l.out)
      throw InputError(name_ + " layer " + std::to_string(i + 1) + " has inconsistent shapes");
    if (i > 0 && layers_[i - 1].out != l.in)
      throw InputError(name_ + " layer " + std::to_string(i + 1) +
                       " input does not match the previous layer");
  }
}

Mlp Mlp::create(std::string name, const std::vector<std::size_t>& widths, bool relu_output,
                std::mt19937_64& rng, double init_range) {
  if (widths.size() < 2) throw UsageError("an MLP needs at least input and output widths");
  std::uniform_real_distribution<double> dist(-init_range, init_range);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayer l;
    l.in = widths[i];
    l.out = widths[i + 1];
    l.weights.resize(l.in * l.out);
    l.bias.resize(l.out);
    for (auto& w : l.weights) w = dist(rng);
    for (auto& b : l.bias) b = dist(rng);
    l.relu = (i + 2 < widths.size()) || relu_output;
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(name), std::move(layers));
}

Vector Mlp::forward(std::span<const double> x, Trace* trace) const {
  if (x.size() != input_dim())
    throw UsageError(name_ + " expects input of size " + std::to_string(input_dim()) +
                     ", got " + std::to_string(x.size()));
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Vector cur(x.begin(), x.end());
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    Vector z(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double s = l.bias[o];
      const double* row = &l.weights[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) s += row[i] * cur[i];
      if (!std::isfinite(s))
        throw NumericError("non-finite activation in " + name_ + " layer " +
                           std::to_string(li + 1));
      z[o] = s;
    }
    Vector a = z;
    if (l.relu)
      for (auto& v : a) v = v > 0.0 ? v : 0.0;
    if (trace) {
      trace->inputs.push_back(std::move(cur));
      trace->pre.push_back(std::move(z));
    }
    cur = std::move(a);
  }
  return cur;
}

Vector Mlp::backward(const Trace& trace, std::span<const double> dout, Mlp& grad) const {
  if (dout.size() != output_dim()) throw UsageError(name_ + ": gradient size mismatch");
  Vector delta(dout.begin(), dout.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    auto& g = grad.layers_[li];
    const auto& z = trace.pre[li];
    const auto& in = trace.inputs[li];
    if (l.relu)
      for (std::size_t o = 0; o < l.out; ++o)
        if (!(z[o] > 0.0)) delta[o] = 0.0;
    Vector din(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (!std::isfinite(d))
        throw NumericError("non-finite gradient in " + name_ + " layer " +
                           std::to_string(li + 1));
      if (d == 0.0) continue;
      g.bias[o] += d;
      const double* row = &l.weights[o * l.in];
      double* grow = &g.weights[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) {
        grow[i] += d * in[i];
        din[i] += d * row[i];
      }
    }
    delta = std::move(din);
  }
  return delta;
}

Mlp Mlp::zeros_like() const {
  Mlp out = *this;
  out.set_zero();
  return out;
}

void Mlp::set_zero() {
  for (auto& l : layers_) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<std::span<double>> Mlp::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> Mlp::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

json Mlp::to_json() const {
  json layers = json::array();
  for (const auto& l : layers_) {
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"relu", l.relu},
                      {"weights", l.weights},
                      {"bias", l.bias}});
  }
  return {{"layers", std::move(layers)}};
}

Mlp Mlp::from_json(const std::string& name, const json& j) {
  try {
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
      DenseLayer l;
      l.in = lj.at("in").get<std::size_t>();
      l.out = lj.at("out").get<std::size_t>();
      l.relu = lj.at("relu").get<bool>();
      l.weights = lj.at("weights").get<std::vector<double>>();
      l.bias = lj.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(l));
    }
    return Mlp(name, std::move(layers));
  } catch (const json::exception& e) {
    throw InputError("malformed " + name + " parameters: " + e.what());
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.in != b.in || a.out != b.out || a.relu != b.relu || a.weights != b.weights ||
        a.bias != b.bias)
      return false;
  }
  return true;
}

}  // namespace clarq
