#pragma once

// Tanh feedforward network W_N(x; theta) with exact gradients.
//
// Layer l computes a_l = sigma_l(H_l a_{l-1} + b_l) with tanh on hidden
// layers and an affine (or sigmoid) scalar head. Parameters flatten in a
// fixed canonical order: layer by layer, row-major weights then biases.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlyap/candidate.hpp"

namespace nlyap {

enum class OutputHead { Affine, Sigmoid };

std::string to_string(OutputHead h);
OutputHead output_head_from_string(const std::string& s);

struct NetParams {
  std::vector<std::size_t> layer_dims;        // [n, h_1, ..., h_L, 1]
  std::vector<std::vector<double>> weights;   // weights[l]: dims[l+1] x dims[l], row-major
  std::vector<std::vector<double>> biases;    // biases[l]: dims[l+1]
  OutputHead head = OutputHead::Affine;

  /// Throws ArgumentError on shape mismatch or non-finite parameters.
  void validate() const;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t param_count() const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  static NetParams zeros(std::vector<std::size_t> dims, OutputHead head = OutputHead::Affine);
  /// Xavier-uniform weights, zero biases.
  static NetParams xavier(std::vector<std::size_t> dims, std::uint64_t seed,
                          OutputHead head = OutputHead::Affine);

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Per-layer pre-activations and activations for one input.
struct ForwardTape {
  std::vector<std::vector<double>> pre;  // pre[l] = H_l a_l + b_l
  std::vector<std::vector<double>> act;  // act[0] = x, act[l+1] = sigma(pre[l])

  double output() const { return act.back()[0]; }
};

double forward(const NetParams& net, std::span<const double> x, ForwardTape& tape);
std::pair<double, ForwardTape> forward(const NetParams& net, std::span<const double> x);

/// grad_x W_N by a reverse sweep over the tape.
std::vector<double> input_gradient(const NetParams& net, const ForwardTape& tape);

/// dW_N/dtheta, canonical order.
std::vector<double> param_gradient_output(const NetParams& net, const ForwardTape& tape);

/// d/dtheta [grad_x W_N . v] by forward-over-reverse.
std::vector<double> param_gradient_directional_input_grad(const NetParams& net,
                                                          const ForwardTape& tape,
                                                          std::span<const double> v);

/// Directional derivatives of every layer along v (forward tangent sweep).
struct TangentTape {
  std::vector<std::vector<double>> pre;  // d pre[l] / dx . v
  std::vector<std::vector<double>> act;  // d act[l] / dx . v
  double output() const { return act.back()[0]; }
};

/// Fills `tangent` and returns grad_x W_N . v.
double directional_forward(const NetParams& net, const ForwardTape& tape,
                           std::span<const double> v, TangentTape& tangent);

/// grad += d/dtheta [value_seed * W_N + directional_seed * (grad_x W_N . v)],
/// where `tangent` is the directional sweep along v.
void accumulate_param_gradient(const NetParams& net, const ForwardTape& tape,
                               const TangentTape& tangent, double value_seed,
                               double directional_seed, std::span<double> grad);

/// Interval enclosure of W_N on a box. Each pre-activation enclosure is the
/// intersection of the plain interval sweep with a layer-wise mean-value
/// form around the box midpoint.
Interval enclose_output(const NetParams& net, std::span<const Interval> box);
/// Interval enclosure of W_N and grad_x W_N on a box: a forward interval
/// sweep caching activation enclosures, then a reverse sweep with
/// 1 - a^2 evaluated on the cached activation intervals. The gradient is
/// intersected with the forward-mode Jacobian of the same sweep.
Interval enclose_output_and_gradient(const NetParams& net, std::span<const Interval> box,
                                     std::span<Interval> grad);

class NetCandidate final : public CandidateFunction {
 public:
  explicit NetCandidate(NetParams net);

  const NetParams& params() const { return net_; }
  std::size_t dim() const override { return net_.input_dim(); }
  double value(std::span<const double> x) const override;
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const override;
  Interval enclose_value(std::span<const Interval> box) const override;
  Interval enclose_value_and_gradient(std::span<const Interval> box,
                                      std::span<Interval> grad) const override;
  std::string describe() const override;

 private:
  NetParams net_;
};

// ---------------------------------------------------------------------------
// Checkpoints: JSON with parameters as hexadecimal float strings ("%a"),
// which round-trip bit-exactly.

std::string hex_double(double v);
double parse_hex_double(const std::string& s);

nlohmann::json net_to_json(const NetParams& net);
NetParams net_from_json(const nlohmann::json& j);

/// A checkpoint holds either a network or a reference to the closed-form
/// scalar-cubic oracle (kind "analytic_scalar_cubic").
struct Checkpoint {
  std::optional<NetParams> net;
  std::optional<double> oracle_alpha;
  nlohmann::json metadata = nlohmann::json::object();

  std::unique_ptr<CandidateFunction> candidate() const;
  std::size_t input_dim() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws ArgumentError on unreadable or malformed files.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nlyap
