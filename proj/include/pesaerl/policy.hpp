#pragma once

// Feedforward policy networks parameterized by one flat weight vector.
//
// Flattening order: layer-major; inside a layer all weights, then all
// biases; weight tensors row-major. Dense weights have shape (out, in),
// convolution kernels (out_channels, in_channels, kernel_h, kernel_w).
// Convolutions use valid padding. Activations are laid out CHW.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pesaerl/errors.hpp"

namespace pesaerl {

enum class Activation { none, relu };

inline std::string_view activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "none";
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::none;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct Conv2dLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  Activation activation = Activation::none;
  friend bool operator==(const Conv2dLayer&, const Conv2dLayer&) = default;
};

using Layer = std::variant<DenseLayer, Conv2dLayer>;

struct NetworkSpec {
  std::vector<std::size_t> input_shape;  // {n} or {channels, height, width}
  std::vector<Layer> layers;
  std::size_t action_count = 0;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

namespace detail {

inline std::size_t shape_size(const std::vector<std::size_t>& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const std::vector<std::size_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

inline std::string layer_label(std::size_t i) {
  return "layer " + std::to_string(i);
}

inline std::size_t layer_params(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->in * d->out + d->out;
  const auto& c = std::get<Conv2dLayer>(layer);
  return c.kernel_h * c.kernel_w * c.in_channels * c.out_channels + c.out_channels;
}

/// Shapes of every activation tensor: entry 0 is the input, entry i+1 the
/// output of layer i. Throws ConfigError naming the first incompatible pair.
inline std::vector<std::vector<std::size_t>> propagate_shapes(const NetworkSpec& spec,
                                                             bool check_actions = true) {
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0)
    throw ConfigError("network input shape is empty");
  if (spec.layers.empty()) throw ConfigError("network has no layers");
  if (check_actions && spec.action_count == 0)
    throw ConfigError("action_count must be positive");

  std::vector<std::vector<std::size_t>> shapes{spec.input_shape};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& cur = shapes.back();
    const std::string from = i == 0 ? std::string("input") : layer_label(i - 1);
    const std::string pair = from + " -> " + layer_label(i);
    if (const auto* d = std::get_if<DenseLayer>(&spec.layers[i])) {
      if (d->in == 0 || d->out == 0)
        throw ConfigError(layer_label(i) + ": dense layer with zero width");
      if (shape_size(cur) != d->in)
        throw ConfigError("shape mismatch " + pair + ": " + shape_string(cur) +
                          " does not flatten to " + std::to_string(d->in));
      shapes.push_back({d->out});
    } else {
      const auto& c = std::get<Conv2dLayer>(spec.layers[i]);
      if (c.out_channels == 0 || c.kernel_h == 0 || c.kernel_w == 0 || c.stride == 0)
        throw ConfigError(layer_label(i) + ": degenerate convolution");
      if (cur.size() != 3 || cur[0] != c.in_channels)
        throw ConfigError("shape mismatch " + pair + ": " + shape_string(cur) +
                          " is not a " + std::to_string(c.in_channels) + "-channel image");
      if (cur[1] < c.kernel_h || cur[2] < c.kernel_w)
        throw ConfigError("shape mismatch " + pair + ": kernel larger than " +
                          shape_string(cur));
      shapes.push_back({c.out_channels, (cur[1] - c.kernel_h) / c.stride + 1,
                        (cur[2] - c.kernel_w) / c.stride + 1});
    }
  }
  if (check_actions && shape_size(shapes.back()) != spec.action_count)
    throw ConfigError("final layer output " + shape_string(shapes.back()) +
                      " does not equal action_count " + std::to_string(spec.action_count));
  return shapes;
}

}  // namespace detail

inline void validate(const NetworkSpec& spec) { (void)detail::propagate_shapes(spec); }

/// Total number of weights and biases.
inline std::size_t param_count(const NetworkSpec& spec) {
  validate(spec);
  std::size_t total = 0;
  for (const auto& l : spec.layers) total += detail::layer_params(l);
  return total;
}

/// The Atari-scale architecture: three convolutions and two dense layers
/// over a 4x84x84 frame stack.
inline NetworkSpec atari_spec(std::size_t action_count) {
  NetworkSpec s;
  s.input_shape = {4, 84, 84};
  s.layers = {
      Conv2dLayer{4, 32, 8, 8, 4, Activation::relu},
      Conv2dLayer{32, 64, 4, 4, 2, Activation::relu},
      Conv2dLayer{64, 64, 3, 3, 1, Activation::relu},
      DenseLayer{64 * 7 * 7, 512, Activation::relu},
      DenseLayer{512, action_count, Activation::none},
  };
  s.action_count = action_count;
  return s;
}

/// Dense MLP: sizes {in, h1, ..., out}; relu on hidden layers, none on the last.
inline NetworkSpec mlp_spec(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
  NetworkSpec s;
  s.input_shape = {sizes.front()};
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    s.layers.push_back(DenseLayer{sizes[i], sizes[i + 1],
                                  i + 2 == sizes.size() ? Activation::none : Activation::relu});
  s.action_count = sizes.back();
  validate(s);
  return s;
}

// Text schema, one layer per ';'-separated clause:
//   input 4x84x84; conv 4 32 8x8 4 relu; dense 3136 512 relu; dense 512 4 none
// The action count is the output size of the last layer.
inline NetworkSpec parse_network(std::string_view text) {
  NetworkSpec spec;
  auto parse_dims = [](const std::string& tok) {
    std::vector<std::size_t> dims;
    std::stringstream ss(tok);
    std::string part;
    while (std::getline(ss, part, 'x')) {
      try {
        std::size_t pos = 0;
        const auto v = std::stoull(part, &pos);
        if (pos != part.size()) throw std::invalid_argument(part);
        dims.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("network: bad dimension '" + tok + "'");
      }
    }
    return dims;
  };
  auto parse_act = [](const std::string& tok) {
    if (tok == "relu") return Activation::relu;
    if (tok == "none") return Activation::none;
    throw ConfigError("network: unknown activation '" + tok + "'");
  };

  std::stringstream clauses{std::string(text)};
  std::string clause;
  while (std::getline(clauses, clause, ';')) {
    std::stringstream ss(clause);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "input" && tok.size() == 2) {
      spec.input_shape = parse_dims(tok[1]);
    } else if (tok[0] == "dense" && tok.size() == 4) {
      spec.layers.push_back(DenseLayer{parse_dims(tok[1]).at(0), parse_dims(tok[2]).at(0),
                                       parse_act(tok[3])});
    } else if (tok[0] == "conv" && tok.size() == 6) {
      const auto k = parse_dims(tok[3]);
      if (k.size() != 2) throw ConfigError("network: kernel must be HxW");
      spec.layers.push_back(Conv2dLayer{parse_dims(tok[1]).at(0), parse_dims(tok[2]).at(0),
                                        k[0], k[1], parse_dims(tok[4]).at(0),
                                        parse_act(tok[5])});
    } else {
      throw ConfigError("network: cannot parse clause '" + clause + "'");
    }
  }
  if (spec.input_shape.empty()) throw ConfigError("network: missing 'input' clause");
  spec.action_count = detail::shape_size(detail::propagate_shapes(spec, false).back());
  validate(spec);
  return spec;
}

inline std::string to_text(const NetworkSpec& spec) {
  std::string out = "input " + detail::shape_string(spec.input_shape);
  for (const auto& l : spec.layers) {
    out += "; ";
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      out += "dense " + std::to_string(d->in) + " " + std::to_string(d->out) + " " +
             std::string(activation_name(d->activation));
    } else {
      const auto& c = std::get<Conv2dLayer>(l);
      out += "conv " + std::to_string(c.in_channels) + " " + std::to_string(c.out_channels) +
             " " + std::to_string(c.kernel_h) + "x" + std::to_string(c.kernel_w) + " " +
             std::to_string(c.stride) + " " + std::string(activation_name(c.activation));
    }
  }
  return out;
}

/// Read-only view of one layer's slice of the flat vector.
struct LayerView {
  std::span<const double> weights;
  std::span<const double> bias;
};

/// Owned copy of one layer's parameters (unflattened form).
struct LayerParameters {
  std::vector<double> weights;
  std::vector<double> bias;
  friend bool operator==(const LayerParameters&, const LayerParameters&) = default;
};

/// Consumes a flat vector front to back; `bind` requires it to end empty.
class WeightCursor {
 public:
  explicit WeightCursor(std::span<const double> data) : data_(data) {}
  std::span<const double> take(std::size_t n) {
    if (n > data_.size() - offset_)
      throw InputError("weight vector too short: needed " + std::to_string(offset_ + n) +
                       ", have " + std::to_string(data_.size()));
    auto s = data_.subspan(offset_, n);
    offset_ += n;
    return s;
  }
  std::size_t consumed() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

 private:
  std::span<const double> data_;
  std::size_t offset_ = 0;
};

/// Split a flat vector into per-layer views. Every element is covered by
/// exactly one view.
inline std::vector<LayerView> bind_layers(const NetworkSpec& spec, std::span<const double> weights) {
  WeightCursor cursor(weights);
  std::vector<LayerView> views;
  views.reserve(spec.layers.size());
  for (const auto& l : spec.layers) {
    LayerView v;
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      v.weights = cursor.take(d->in * d->out);
      v.bias = cursor.take(d->out);
    } else {
      const auto& c = std::get<Conv2dLayer>(l);
      v.weights = cursor.take(c.out_channels * c.in_channels * c.kernel_h * c.kernel_w);
      v.bias = cursor.take(c.out_channels);
    }
    views.push_back(v);
  }
  if (cursor.remaining() != 0)
    throw InputError("weight vector too long: " + std::to_string(cursor.remaining()) +
                     " unread entries");
  return views;
}

inline std::vector<LayerParameters> unflatten(const NetworkSpec& spec,
                                              std::span<const double> weights) {
  std::vector<LayerParameters> out;
  for (const auto& v : bind_layers(spec, weights))
    out.push_back({{v.weights.begin(), v.weights.end()}, {v.bias.begin(), v.bias.end()}});
  return out;
}

inline std::vector<double> flatten(const std::vector<LayerParameters>& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t greedy_action(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

/// A network spec bound to a weight vector. Stateless after construction;
/// safe to share across threads.
class Policy {
 public:
  Policy(std::shared_ptr<const NetworkSpec> spec, std::vector<double> weights)
      : spec_(std::move(spec)), weights_(std::move(weights)) {
    shapes_ = detail::propagate_shapes(*spec_);
    const std::size_t expected = param_count(*spec_);
    if (weights_.size() != expected)
      throw InputError("policy vector has length " + std::to_string(weights_.size()) +
                       ", spec needs " + std::to_string(expected));
    for (double w : weights_)
      if (!std::isfinite(w)) throw InputError("policy vector has a non-finite entry");
    views_ = bind_layers(*spec_, weights_);
  }

  Policy(const Policy& o) : Policy(o.spec_, o.weights_) {}
  Policy& operator=(const Policy& o) {
    if (this != &o) *this = Policy(o);
    return *this;
  }
  Policy(Policy&&) = default;
  Policy& operator=(Policy&&) = default;

  const NetworkSpec& spec() const { return *spec_; }
  std::span<const double> weights() const { return weights_; }

  std::vector<double> logits(std::span<const double> observation) const {
    if (observation.size() != detail::shape_size(spec_->input_shape))
      throw InputError("observation has " + std::to_string(observation.size()) +
                       " entries, network expects " +
                       detail::shape_string(spec_->input_shape));
    std::vector<double> cur(observation.begin(), observation.end());
    std::vector<double> next;
    for (std::size_t i = 0; i < spec_->layers.size(); ++i) {
      const auto& v = views_[i];
      Activation act;
      if (const auto* d = std::get_if<DenseLayer>(&spec_->layers[i])) {
        act = d->activation;
        next.assign(d->out, 0.0);
        for (std::size_t o = 0; o < d->out; ++o) {
          double acc = v.bias[o];
          const double* row = v.weights.data() + o * d->in;
          for (std::size_t k = 0; k < d->in; ++k) acc += row[k] * cur[k];
          next[o] = acc;
        }
      } else {
        const auto& c = std::get<Conv2dLayer>(spec_->layers[i]);
        act = c.activation;
        conv_forward(c, shapes_[i], shapes_[i + 1], v, cur, next);
      }
      for (double& a : next) {
        if (act == Activation::relu && a < 0.0) a = 0.0;
        if (!std::isfinite(a))
          throw NumericError("non-finite activation in layer " + std::to_string(i),
                             static_cast<int>(i));
      }
      cur.swap(next);
    }
    return cur;
  }

  std::size_t act(std::span<const double> observation) const {
    return greedy_action(logits(observation));
  }

 private:
  static void conv_forward(const Conv2dLayer& c, const std::vector<std::size_t>& in_shape,
                           const std::vector<std::size_t>& out_shape, const LayerView& v,
                           const std::vector<double>& in, std::vector<double>& out) {
    const std::size_t H = in_shape[1], W = in_shape[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2];
    out.assign(c.out_channels * oh * ow, 0.0);
    const std::size_t ksize = c.kernel_h * c.kernel_w;
    for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = v.bias[oc];
          for (std::size_t ic = 0; ic < c.in_channels; ++ic) {
            const double* kern = v.weights.data() + (oc * c.in_channels + ic) * ksize;
            const double* plane = in.data() + ic * H * W;
            for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
              const double* row = plane + (y * c.stride + ky) * W + x * c.stride;
              for (std::size_t kx = 0; kx < c.kernel_w; ++kx)
                acc += kern[ky * c.kernel_w + kx] * row[kx];
            }
          }
          out[(oc * oh + y) * ow + x] = acc;
        }
      }
    }
  }

  std::shared_ptr<const NetworkSpec> spec_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> shapes_;
  std::vector<LayerView> views_;
};

/// One-shot forward pass: greedy action of `weights` under `spec`.
inline std::size_t forward(const NetworkSpec& spec, std::span<const double> weights,
                           std::span<const double> observation) {
  return Policy(std::make_shared<const NetworkSpec>(spec),
                std::vector<double>(weights.begin(), weights.end()))
      .act(observation);
}

}  // namespace pesaerl
