#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lsat/rng.hpp"
#include "lsat/types.hpp"

namespace lsat {

// One low-rank pair for a single target layer. The effective weight
// update is delta = scaling * A * B with A (d x r) and B (r x k).
struct LoraAdapter {
  std::string target_layer;
  Matrix a;
  Matrix b;
  double scaling = 1.0;

  Index rank() const { return a.cols(); }
  Index rows() const { return a.rows(); }
  Index cols() const { return b.cols(); }

  // scaling * A * B; DimensionError if the factors disagree on r.
  Matrix effective_delta() const;
};

// W + scaling * A * B. W must match the adapter's (d, k).
Matrix effective_weight(const Matrix& w, const LoraAdapter& adapter);

// Fresh adapter: A ~ Gaussian(0, 1/d), B = 0, so the initial delta is
// exactly zero and the adapted model starts at the frozen base.
// Requires 1 <= r <= min(d, k)/2.
LoraAdapter init_adapter(const std::string& target_layer, Index d, Index k, Index r,
                         SeededRng& rng);

// Adapters keyed by target layer. Map iteration (sorted keys) fixes the
// serialization order, so equal sets produce equal bytes.
struct AdapterSet {
  std::map<std::string, LoraAdapter> entries;
  std::string tag;

  std::vector<std::string> layer_names() const;
};

struct FusionCoefficient {
  explicit FusionCoefficient(double v);
  double value;
};

enum class FusionMode {
  // Exact linear combination of effective deltas via factor
  // concatenation: fused rank is r_h + r_t and
  // delta' = lambda*delta_long + (1-lambda)*delta_short exactly.
  kDeltaExact,
  // Literal interpolation of the factors themselves; requires equal
  // ranks and is NOT linear in the effective delta.
  kFactorInterp,
};

const char* fusion_mode_name(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& name);

// Task-arithmetic fusion of a long-term and a short-term set. Both sets
// must cover the same layer names with matching (d, k); ranks may differ
// in kDeltaExact mode. lambda = 1 reproduces the long-term deltas,
// lambda = 0 the short-term ones.
AdapterSet fuse_task_arithmetic(const AdapterSet& long_term, const AdapterSet& short_term,
                                FusionCoefficient lambda, FusionMode mode = FusionMode::kDeltaExact);

// Checkpoint container: magic "LSAT", version u16, section string,
// tag string, entry count u32, then per entry the layer name, d, k, r
// (u32), scaling (f64) and A then B as little-endian f64 row-major.
// load(save(x)) == x bit for bit, tag and scaling included.
void save_adapter_set(const AdapterSet& set, const std::filesystem::path& path);
AdapterSet load_adapter_set(const std::filesystem::path& path);

// Serialized image of the set (same bytes save_adapter_set writes);
// handy for checkpoint-equality checks and hashing.
std::vector<std::uint8_t> adapter_set_bytes(const AdapterSet& set);
std::uint64_t adapter_set_hash(const AdapterSet& set);

}  // namespace lsat
