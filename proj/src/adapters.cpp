#include "lsat/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lsat/errors.hpp"
#include "lsat/linalg.hpp"
#include "lsat/serialize.hpp"

namespace lsat {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'A', 'T'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr const char* kAdapterSection = "adapter_set";

}  // namespace

Matrix LoraAdapter::effective_delta() const {
  if (a.cols() != b.rows())
    throw DimensionError("adapter '" + target_layer + "': A " + shape_str(a) + " vs B " +
                         shape_str(b));
  Matrix d = scaling * (a * b);
  ensure_finite(d, "adapter '" + target_layer + "' delta");
  return d;
}

Matrix effective_weight(const Matrix& w, const LoraAdapter& adapter) {
  if (w.rows() != adapter.rows() || w.cols() != adapter.cols())
    throw DimensionError("effective_weight '" + adapter.target_layer + "': W " + shape_str(w) +
                         " vs delta " + std::to_string(adapter.rows()) + "x" +
                         std::to_string(adapter.cols()));
  return w + adapter.effective_delta();
}

LoraAdapter init_adapter(const std::string& target_layer, Index d, Index k, Index r,
                         SeededRng& rng) {
  if (r < 1 || 2 * r > std::min(d, k))
    throw ConfigError("adapter rank " + std::to_string(r) + " out of range for layer " +
                      target_layer + " (" + std::to_string(d) + "x" + std::to_string(k) +
                      "); need 1 <= r <= min(d,k)/2");
  LoraAdapter adapter;
  adapter.target_layer = target_layer;
  adapter.a = rng.gaussian_matrix(d, r, 1.0 / std::sqrt(static_cast<double>(d)));
  adapter.b = Matrix::Zero(r, k);
  adapter.scaling = 1.0;
  return adapter;
}

std::vector<std::string> AdapterSet::layer_names() const {
  std::vector<std::string> names;
  names.reserve(entries.size());
  for (const auto& [name, _] : entries) names.push_back(name);
  return names;
}

FusionCoefficient::FusionCoefficient(double v) : value(v) {
  if (!(v >= 0.0 && v <= 1.0))
    throw UsageError("fusion coefficient " + std::to_string(v) + " outside [0,1]");
}

const char* fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::kDeltaExact ? "delta_exact" : "factor_interp";
}

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "delta_exact") return FusionMode::kDeltaExact;
  if (name == "factor_interp") return FusionMode::kFactorInterp;
  throw ConfigError("unknown fusion mode '" + name + "'");
}

namespace {

void require_same_layers(const AdapterSet& lhs, const AdapterSet& rhs) {
  std::vector<std::string> only_lhs, only_rhs;
  for (const auto& [name, _] : lhs.entries)
    if (!rhs.entries.count(name)) only_lhs.push_back(name);
  for (const auto& [name, _] : rhs.entries)
    if (!lhs.entries.count(name)) only_rhs.push_back(name);
  if (only_lhs.empty() && only_rhs.empty()) return;
  std::string msg = "fusion layer-set mismatch;";
  if (!only_lhs.empty()) {
    msg += " only in long:";
    for (const auto& n : only_lhs) msg += " " + n;
  }
  if (!only_rhs.empty()) {
    msg += " only in short:";
    for (const auto& n : only_rhs) msg += " " + n;
  }
  throw FusionError(msg);
}

}  // namespace

AdapterSet fuse_task_arithmetic(const AdapterSet& long_term, const AdapterSet& short_term,
                                FusionCoefficient lambda, FusionMode mode) {
  require_same_layers(long_term, short_term);
  const double lam = lambda.value;
  AdapterSet fused;
  fused.tag = "fused:lambda=" + std::to_string(lam) + ":" + fusion_mode_name(mode);
  for (const auto& [name, lhs] : long_term.entries) {
    const LoraAdapter& rhs = short_term.entries.at(name);
    if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols())
      throw FusionError("layer '" + name + "': shape " + std::to_string(lhs.rows()) + "x" +
                        std::to_string(lhs.cols()) + " vs " + std::to_string(rhs.rows()) + "x" +
                        std::to_string(rhs.cols()));
    LoraAdapter out;
    out.target_layer = name;
    if (mode == FusionMode::kDeltaExact) {
      // A' = [A_h | A_t], B' = [lam*s_h*B_h over (1-lam)*s_t*B_t], so
      // A'B' = lam*s_h*A_h*B_h + (1-lam)*s_t*A_t*B_t with no approximation.
      out.a.resize(lhs.rows(), lhs.rank() + rhs.rank());
      out.a << lhs.a, rhs.a;
      out.b.resize(lhs.rank() + rhs.rank(), lhs.cols());
      out.b.topRows(lhs.rank()) = (lam * lhs.scaling) * lhs.b;
      out.b.bottomRows(rhs.rank()) = ((1.0 - lam) * rhs.scaling) * rhs.b;
      out.scaling = 1.0;
    } else {
      if (lhs.rank() != rhs.rank())
        throw FusionError("factor_interp needs equal ranks on layer '" + name + "': " +
                          std::to_string(lhs.rank()) + " vs " + std::to_string(rhs.rank()));
      if (lhs.scaling != rhs.scaling)
        throw FusionError("factor_interp needs equal scaling on layer '" + name + "'");
      out.a = lam * lhs.a + (1.0 - lam) * rhs.a;
      out.b = lam * lhs.b + (1.0 - lam) * rhs.b;
      out.scaling = lhs.scaling;
    }
    fused.entries.emplace(name, std::move(out));
  }
  return fused;
}

std::vector<std::uint8_t> adapter_set_bytes(const AdapterSet& set) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.u16(kFormatVersion);
  w.str(kAdapterSection);
  w.str(set.tag);
  w.u32(static_cast<std::uint32_t>(set.entries.size()));
  for (const auto& [name, adapter] : set.entries) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(adapter.rows()));
    w.u32(static_cast<std::uint32_t>(adapter.cols()));
    w.u32(static_cast<std::uint32_t>(adapter.rank()));
    w.f64(adapter.scaling);
    w.matrix(adapter.a);
    w.matrix(adapter.b);
  }
  return w.bytes();
}

std::uint64_t adapter_set_hash(const AdapterSet& set) { return fnv1a64(adapter_set_bytes(set)); }

void save_adapter_set(const AdapterSet& set, const std::filesystem::path& path) {
  ByteWriter w;
  const auto bytes = adapter_set_bytes(set);
  w.raw(bytes.data(), bytes.size());
  w.write_file(path);
}

AdapterSet load_adapter_set(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.require(4, "magic");
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion)
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  const std::size_t section_at = r.offset();
  const std::string section = r.str();
  if (section != kAdapterSection)
    throw FormatError("expected section '" + std::string(kAdapterSection) + "', found '" +
                          section + "'",
                      section_at);
  AdapterSet set;
  set.tag = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    LoraAdapter adapter;
    adapter.target_layer = r.str();
    const std::uint32_t d = r.u32();
    const std::uint32_t k = r.u32();
    const std::uint32_t rank = r.u32();
    adapter.scaling = r.f64();
    adapter.a = r.matrix(static_cast<Index>(d), static_cast<Index>(rank));
    adapter.b = r.matrix(static_cast<Index>(rank), static_cast<Index>(k));
    set.entries.emplace(adapter.target_layer, std::move(adapter));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after adapter set", r.offset());
  return set;
}

}  // namespace lsat
