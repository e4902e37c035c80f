#pragma once

#include <string>
#include <vector>

#include "flowlab/linalg.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

/// Clamp of x to [-c, c] written as one ReLU layer:
/// x - relu(x - c) + relu(-x - c).
VecD input_clip(std::span<const double> x, double c);

/// Feedforward ReLU network
///   f = W_L o phi_{v_L} o W_{L-1} o ... o W_1 o phi_{v_1} o W_0
/// with shifted ReLU phi_v(z)_i = relu(z_i - v_i). Architecture
/// (p_0, ..., p_{L+1}) with p_0 = d + 1 (clipped input x/c plus t) and
/// p_{L+1} = d. Outputs are clamped at +-output_bound componentwise.
class MlpNetwork {
 public:
  /// architecture = {d + 1, hidden..., d}; input_box is the clip radius c
  /// (log n in training use); output_bound caps each output component.
  MlpNetwork(std::vector<int> architecture, double input_box, double output_bound);

  /// Fan-in-scaled symmetric random weights, zero shifts.
  void init_random(Rng& rng);
  void set_zero();

  VecD forward(double t, std::span<const double> x) const;

  int dim() const { return architecture_.back(); }
  int hidden_layers() const { return static_cast<int>(architecture_.size()) - 2; }
  const std::vector<int>& architecture() const { return architecture_; }
  double input_box() const { return input_box_; }
  double output_bound() const { return output_bound_; }

  std::vector<MatD>& weights() { return weights_; }
  const std::vector<MatD>& weights() const { return weights_; }
  std::vector<VecD>& shifts() { return shifts_; }
  const std::vector<VecD>& shifts() const { return shifts_; }

  size_t parameter_count() const;

  /// Flat parameter access in a fixed order (W_0, v_1, W_1, ..., v_L, W_L);
  /// used by the optimizer and the finite-difference gradient checks.
  double get_parameter(size_t idx) const;
  void set_parameter(size_t idx, double value);

  struct Trace {
    VecD input;                    // p_0 inputs after clip/scale + t
    std::vector<VecD> pre_shift;   // z_i = W_{i-1} r_{i-1}, i = 1..L, plus output pre-clamp
    std::vector<VecD> activations; // r_i = relu(z_i - v_i), i = 1..L
    VecD output;                   // clamped output
  };

  /// Forward pass keeping intermediates for reverse-mode differentiation.
  Trace forward_trace(double t, std::span<const double> x) const;

  /// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
  /// ReLU and clamp kinks propagate the 0-at-kink subgradient convention
  /// that their ReLU compositions induce.
  struct Gradients {
    std::vector<MatD> weights;
    std::vector<VecD> shifts;
    void scale_add(double s, Gradients& into) const;
  };
  Gradients zero_gradients() const;
  void backward(const Trace& trace, std::span<const double> dloss_doutput,
                Gradients& grads) const;

  /// Checkpoint format: magic FLMLP001, architecture length and entries as
  /// little-endian u64, input_box and output_bound, then row-major weights
  /// and shifts as little-endian f64.
  std::string serialize() const;
  static MlpNetwork deserialize(const std::string& bytes);
  void save(const std::string& path) const;
  static MlpNetwork load(const std::string& path);

 private:
  std::vector<int> architecture_;
  double input_box_;
  double output_bound_;
  std::vector<MatD> weights_;  // W_0..W_L
  std::vector<VecD> shifts_;   // v_1..v_L
};

/// Output cap from the function-class definition:
///   e^{2L} log^3 n + (1 + e^{2L}) log^2 n + log n + 1.
double output_bound_value(double perturbation_bound, double n);

}  // namespace flowlab
