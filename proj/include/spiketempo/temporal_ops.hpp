#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spiketempo/tensor.hpp"

namespace spiketempo {

// overlap:    groups start every `stride` steps; a trailing frame copies the
//             last time point when (T - len) is not a multiple of stride.
// no_overlap: groups start every len + stride - 1 steps; a trailing frame
//             copies the last time point when a partial group remains.
// pool:       plain max pooling with the overlap grouping and truncation
//             (no trailing frame). Used as the comparison baseline.
enum class TrVariant { overlap, no_overlap, pool };

// `max` keeps strong spikes (value 2) intact; `logical_or` clamps to {0,1}.
enum class Reduction { max, logical_or };

struct TrConfig {
  TrVariant variant = TrVariant::no_overlap;
  std::size_t len = 3;
  std::size_t stride = 1;
  Reduction reduction = Reduction::max;

  void validate() const;
  bool operator==(const TrConfig&) const = default;
};

const char* to_string(TrVariant v);
TrVariant parse_tr_variant(const std::string& s);
const char* to_string(Reduction r);
Reduction parse_reduction(const std::string& s);

// Output time length predicted by the closed-form shape laws.
// Throws ShapeError when len > T.
std::size_t tr_output_length(std::size_t t_len, const TrConfig& cfg);

SpikeRaster tr_overlap(const SpikeRaster& x, std::size_t len, std::size_t stride);
SpikeRaster tr_no_overlap(const SpikeRaster& x, std::size_t len, std::size_t stride);
SpikeRaster max_pool_truncating(const SpikeRaster& x, std::size_t len, std::size_t stride);
SpikeRaster tr_apply(const SpikeRaster& x, const TrConfig& cfg);

// Forward that also records, for every output element, the input time index
// it was taken from (first maximum on ties). Feeds tr_backward.
SpikeRaster tr_apply_tracked(const Tensor3& x, const TrConfig& cfg,
                             std::vector<std::int32_t>& source_time);
Tensor3 tr_backward(const Tensor3& grad_out, const std::vector<std::int32_t>& source_time,
                    std::size_t input_t_len);

// Brute-force reference: enumerates every group explicitly.
SpikeRaster tr_oracle(const SpikeRaster& x, const TrConfig& cfg);

// Right-pads the shorter input with zeros so both have max(Ta, Tb) steps.
std::pair<SpikeRaster, SpikeRaster> nar_align(const SpikeRaster& a, const SpikeRaster& b);

// y = d' + x' after alignment. For binary inputs y is in {0,1,2}; 2 marks a
// strong spike where both branches fired.
SpikeRaster nar_residual(const SpikeRaster& x, const SpikeRaster& d);

// Splits dL/dy back into the two branches by dropping the padded tail.
std::pair<Tensor3, Tensor3> nar_backward(const Tensor3& grad_y, std::size_t x_t_len,
                                         std::size_t d_t_len);

}  // namespace spiketempo
