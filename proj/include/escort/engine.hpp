#ifndef ESCORT_ENGINE_HPP
#define ESCORT_ENGINE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "escort/conv.hpp"
#include "escort/csr.hpp"
#include "escort/tensor.hpp"

namespace escort {

enum class EngineKind { DenseDirect, LoweredDense, LoweredSparse, SparseDirect, Auto };

inline constexpr std::array<EngineKind, 4> kConcreteEngines{
    EngineKind::DenseDirect, EngineKind::LoweredDense, EngineKind::LoweredSparse,
    EngineKind::SparseDirect};

inline std::string_view engine_name(EngineKind kind) {
  switch (kind) {
    case EngineKind::DenseDirect: return "dense-direct";
    case EngineKind::LoweredDense: return "lowered-dense";
    case EngineKind::LoweredSparse: return "lowered-sparse";
    case EngineKind::SparseDirect: return "sparse-direct";
    case EngineKind::Auto: return "auto";
  }
  return "?";
}

/// Accepts the canonical names plus the kernel names used in GPU
/// literature: sgemm (lowered dense), csrmm (lowered sparse), sconv
/// (direct sparse) and direct (dense direct).
inline std::optional<EngineKind> parse_engine(std::string_view name) {
  if (name == "dense-direct" || name == "direct") return EngineKind::DenseDirect;
  if (name == "lowered-dense" || name == "sgemm" || name == "im2col")
    return EngineKind::LoweredDense;
  if (name == "lowered-sparse" || name == "csrmm") return EngineKind::LoweredSparse;
  if (name == "sparse-direct" || name == "sconv" || name == "escort")
    return EngineKind::SparseDirect;
  if (name == "auto") return EngineKind::Auto;
  return std::nullopt;
}

/// Sparsity at or above which Auto picks the direct sparse engine.
inline constexpr double kDefaultAutoThreshold = 0.6;

/// Auto rule: SparseDirect when sparsity >= threshold, otherwise
/// LoweredDense. The shape is accepted for rules that also key on layer
/// geometry; the default rule does not.
inline EngineKind select_engine(const ConvShape& /*shape*/, double sparsity,
                                double threshold = kDefaultAutoThreshold) {
  return sparsity >= threshold ? EngineKind::SparseDirect : EngineKind::LoweredDense;
}

/// Everything a layer needs to run on any engine: the input, the pruned
/// dense weights and both CSR forms.
struct PreparedLayer {
  ConvShape shape;
  Tensor4D input;
  Tensor4D weights;
  CsrMatrix csr;
  CsrMatrix csr_stretched;

  double measured_sparsity() const { return sparsity(csr); }
};

/// Builds a layer from seeds: input from `seed`, weights from `seed + 1`,
/// magnitude-pruned to `target_sparsity`.
inline PreparedLayer prepare_layer(const ConvShape& shape, double target_sparsity,
                                   std::uint64_t seed, float range = 1.0f) {
  Tensor4D input = random_tensor(shape.input_dims(), seed, range);
  Tensor4D weights =
      prune_by_magnitude(random_tensor(shape.weight_dims(), seed + 1, range), target_sparsity);
  CsrMatrix csr = dense_to_csr(weights);
  CsrMatrix stretched = stretch_weights(csr, shape);
  return PreparedLayer{shape, std::move(input), std::move(weights), std::move(csr),
                       std::move(stretched)};
}

inline EngineKind resolve_engine(EngineKind kind, const PreparedLayer& layer,
                                 double threshold = kDefaultAutoThreshold) {
  return kind == EngineKind::Auto ? select_engine(layer.shape, layer.measured_sparsity(), threshold)
                                  : kind;
}

/// Runs one engine end to end. The elapsed time covers everything the
/// engine does at inference time: padding for the direct sparse path,
/// lowering for the lowered paths. Weight stretching is offline and not
/// timed.
inline ConvResult run_engine(EngineKind kind, const PreparedLayer& layer, std::size_t workers = 1,
                             double threshold = kDefaultAutoThreshold) {
  const auto t0 = detail::Clock::now();
  ConvResult res;
  switch (resolve_engine(kind, layer, threshold)) {
    case EngineKind::DenseDirect:
      res = conv_dense_direct(layer.input, layer.weights, layer.shape, workers);
      break;
    case EngineKind::LoweredDense:
      res = conv_lowered_dense(layer.input, layer.weights, layer.shape, workers);
      break;
    case EngineKind::LoweredSparse:
      res = conv_lowered_sparse(layer.input, layer.csr, layer.shape, workers);
      break;
    case EngineKind::SparseDirect: {
      const Tensor4D padded = pad_input(layer.input, layer.shape.pad());
      res = workers == 1 ? conv_sparse_direct(padded, layer.csr_stretched, layer.shape)
                         : conv_sparse_direct_parallel(padded, layer.csr_stretched, layer.shape,
                                                       workers);
      break;
    }
    case EngineKind::Auto:
      throw std::logic_error("unresolved engine kind");
  }
  res.elapsed = detail::seconds_since(t0);
  return res;
}

}  // namespace escort

#endif  // ESCORT_ENGINE_HPP
