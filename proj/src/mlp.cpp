#include "flowlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <utility>

#include "flowlab/errors.hpp"

namespace flowlab {

VecD input_clip(std::span<const double> x, double c) {
  if (!(c > 0.0)) throw DomainError("input_clip: clip radius must be positive");
  VecD out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double relu_hi = std::max(0.0, x[i] - c);
    const double relu_lo = std::max(0.0, -x[i] - c);
    out[i] = x[i] - relu_hi + relu_lo;
  }
  return out;
}

MlpNetwork::MlpNetwork(std::vector<int> architecture, double input_box, double output_bound)
    : architecture_(std::move(architecture)), input_box_(input_box), output_bound_(output_bound) {
  if (architecture_.size() < 2) throw ConstructionError("mlp: architecture needs >= 2 entries");
  for (int p : architecture_)
    if (p < 1) throw ConstructionError("mlp: layer widths must be positive");
  if (architecture_.front() != architecture_.back() + 1)
    throw ConstructionError("mlp: input width must be output width + 1 (x plus t)");
  if (!(input_box_ > 0.0)) throw ConstructionError("mlp: input box must be positive");
  if (!(output_bound_ > 0.0)) throw ConstructionError("mlp: output bound must be positive");
  const int l = hidden_layers();
  weights_.reserve(l + 1);
  for (int i = 0; i <= l; ++i) weights_.emplace_back(architecture_[i + 1], architecture_[i]);
  shifts_.reserve(l);
  for (int i = 1; i <= l; ++i) shifts_.emplace_back(architecture_[i], 0.0);
}

void MlpNetwork::init_random(Rng& rng) {
  for (MatD& w : weights_) {
    const double scale = std::sqrt(1.0 / w.cols);
    for (double& v : w.a) v = rng.uniform(-scale, scale);
  }
  for (VecD& v : shifts_) std::fill(v.begin(), v.end(), 0.0);
}

void MlpNetwork::set_zero() {
  for (MatD& w : weights_) std::fill(w.a.begin(), w.a.end(), 0.0);
  for (VecD& v : shifts_) std::fill(v.begin(), v.end(), 0.0);
}

MlpNetwork::Trace MlpNetwork::forward_trace(double t, std::span<const double> x) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("mlp: t must lie in [0,1]");
  const int d = dim();
  const int l = hidden_layers();
  Trace tr;
  tr.input.resize(d + 1);
  const VecD clipped = input_clip(x, input_box_);
  for (int i = 0; i < d; ++i) tr.input[i] = clipped[i] / input_box_;
  tr.input[d] = t;

  VecD h = matvec(weights_[0], tr.input);
  tr.pre_shift.push_back(h);
  for (int i = 1; i <= l; ++i) {
    VecD r(h.size());
    for (size_t k = 0; k < h.size(); ++k) r[k] = std::max(0.0, h[k] - shifts_[i - 1][k]);
    tr.activations.push_back(r);
    h = matvec(weights_[i], r);
    tr.pre_shift.push_back(h);
  }
  tr.output.resize(d);
  for (int i = 0; i < d; ++i) {
    tr.output[i] = std::clamp(h[i], -output_bound_, output_bound_);
  }
  return tr;
}

VecD MlpNetwork::forward(double t, std::span<const double> x) const {
  return forward_trace(t, x).output;
}

size_t MlpNetwork::parameter_count() const {
  size_t n = 0;
  for (const MatD& w : weights_) n += w.a.size();
  for (const VecD& v : shifts_) n += v.size();
  return n;
}

double MlpNetwork::get_parameter(size_t idx) const {
  const int l = hidden_layers();
  size_t off = 0;
  for (int i = 0; i <= l; ++i) {
    if (idx < off + weights_[i].a.size()) return weights_[i].a[idx - off];
    off += weights_[i].a.size();
    if (i < l) {
      if (idx < off + shifts_[i].size()) return shifts_[i][idx - off];
      off += shifts_[i].size();
    }
  }
  throw DomainError("mlp: parameter index out of range");
}

void MlpNetwork::set_parameter(size_t idx, double value) {
  const int l = hidden_layers();
  size_t off = 0;
  for (int i = 0; i <= l; ++i) {
    if (idx < off + weights_[i].a.size()) {
      weights_[i].a[idx - off] = value;
      return;
    }
    off += weights_[i].a.size();
    if (i < l) {
      if (idx < off + shifts_[i].size()) {
        shifts_[i][idx - off] = value;
        return;
      }
      off += shifts_[i].size();
    }
  }
  throw DomainError("mlp: parameter index out of range");
}

MlpNetwork::Gradients MlpNetwork::zero_gradients() const {
  Gradients g;
  for (const MatD& w : weights_) g.weights.emplace_back(w.rows, w.cols);
  for (const VecD& v : shifts_) g.shifts.emplace_back(v.size(), 0.0);
  return g;
}

void MlpNetwork::Gradients::scale_add(double s, Gradients& into) const {
  for (size_t i = 0; i < weights.size(); ++i)
    for (size_t k = 0; k < weights[i].a.size(); ++k) into.weights[i].a[k] += s * weights[i].a[k];
  for (size_t i = 0; i < shifts.size(); ++i)
    for (size_t k = 0; k < shifts[i].size(); ++k) into.shifts[i][k] += s * shifts[i][k];
}

void MlpNetwork::backward(const Trace& trace, std::span<const double> dloss_doutput,
                          Gradients& grads) const {
  const int l = hidden_layers();
  const int d = dim();
  // Output clamp: passes gradient on [-B, B] (the ReLU composition gives
  // slope 1 at the boundary itself under the 0-at-kink convention).
  VecD delta(d);
  const VecD& zout = trace.pre_shift.back();
  for (int i = 0; i < d; ++i) {
    const bool open = zout[i] - output_bound_ <= 0.0 && -zout[i] - output_bound_ <= 0.0;
    delta[i] = open ? dloss_doutput[i] : 0.0;
  }
  // delta holds dL/d(pre_shift[i]) walking layers backwards.
  for (int i = l; i >= 1; --i) {
    const VecD& r = trace.activations[i - 1];
    MatD& gw = grads.weights[i];
    for (int row = 0; row < gw.rows; ++row)
      for (int col = 0; col < gw.cols; ++col) gw(row, col) += delta[row] * r[col];
    // Through W_i then the shifted ReLU.
    const VecD& z = trace.pre_shift[i - 1];
    VecD next(architecture_[i], 0.0);
    for (int col = 0; col < static_cast<int>(next.size()); ++col) {
      double s = 0.0;
      for (int row = 0; row < weights_[i].rows; ++row) s += weights_[i](row, col) * delta[row];
      const bool active = z[col] - shifts_[i - 1][col] > 0.0;
      next[col] = active ? s : 0.0;
      if (active) grads.shifts[i - 1][col] += -s;
    }
    delta = std::move(next);
  }
  MatD& gw0 = grads.weights[0];
  for (int row = 0; row < gw0.rows; ++row)
    for (int col = 0; col < gw0.cols; ++col) gw0(row, col) += delta[row] * trace.input[col];
}

namespace {

constexpr char kMagic[8] = {'F', 'L', 'M', 'L', 'P', '0', '0', '1'};

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct ByteReader {
  const std::string& bytes;
  size_t pos = 0;
  uint64_t u64() {
    if (pos + 8 > bytes.size()) throw std::runtime_error("mlp: truncated checkpoint");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace

std::string MlpNetwork::serialize() const {
  std::string out(kMagic, 8);
  put_u64(out, architecture_.size());
  for (int p : architecture_) put_u64(out, static_cast<uint64_t>(p));
  put_f64(out, input_box_);
  put_f64(out, output_bound_);
  for (const MatD& w : weights_)
    for (double v : w.a) put_f64(out, v);
  for (const VecD& s : shifts_)
    for (double v : s) put_f64(out, v);
  return out;
}

MlpNetwork MlpNetwork::deserialize(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw std::runtime_error("mlp: bad checkpoint header");
  ByteReader r{bytes, 8};
  const uint64_t arch_len = r.u64();
  if (arch_len < 2 || arch_len > 64) throw std::runtime_error("mlp: bad architecture length");
  std::vector<int> arch(arch_len);
  for (uint64_t i = 0; i < arch_len; ++i) arch[i] = static_cast<int>(r.u64());
  const double box = r.f64();
  const double bound = r.f64();
  MlpNetwork net(arch, box, bound);
  for (MatD& w : net.weights_)
    for (double& v : w.a) v = r.f64();
  for (VecD& s : net.shifts_)
    for (double& v : s) v = r.f64();
  return net;
}

void MlpNetwork::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("mlp: cannot open checkpoint for writing: " + path);
  const std::string bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("mlp: checkpoint write failed: " + path);
}

MlpNetwork MlpNetwork::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("mlp: cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

double output_bound_value(double perturbation_bound, double n) {
  const double ln = std::log(n);
  const double e2l = std::exp(2.0 * perturbation_bound);
  return e2l * ln * ln * ln + (1.0 + e2l) * ln * ln + ln + 1.0;
}

}  // namespace flowlab
