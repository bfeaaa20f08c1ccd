#include "lsat/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "lsat/adam.hpp"
#include "lsat/errors.hpp"
#include "lsat/linalg.hpp"
#include "lsat/serialize.hpp"

namespace lsat {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'A', 'T'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr const char* kBaseSection = "base_params";

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

struct Effective {
  Matrix w1;
  Matrix w2;
};

Effective apply_adapters(const BaseParams& base, const AdapterSet* adapters) {
  Effective eff{base.w1, base.w2};
  if (!adapters) return eff;
  for (const auto& [name, adapter] : adapters->entries) {
    const Matrix* target = nullptr;
    Matrix* out = nullptr;
    if (name == kLayerW1) {
      target = &base.w1;
      out = &eff.w1;
    } else if (name == kLayerW2) {
      target = &base.w2;
      out = &eff.w2;
    } else {
      throw CompatibilityError("adapter targets unknown layer '" + name + "'");
    }
    if (adapter.rows() != target->rows() || adapter.cols() != target->cols())
      throw CompatibilityError("adapter '" + name + "' delta " + std::to_string(adapter.rows()) +
                               "x" + std::to_string(adapter.cols()) + " vs layer " +
                               shape_str(*target));
    *out = effective_weight(*target, adapter);
  }
  return eff;
}

// Pooled input rows: u_i = [mean(E[pos]) - mean(E[neg]) || E[target]].
Matrix build_inputs(const Sample* const* samples, std::size_t n, const BaseParams& base) {
  const Index d = base.config.embedding_dim;
  Matrix u = Matrix::Zero(static_cast<Index>(n), 2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = *samples[i];
    auto row = u.row(static_cast<Index>(i));
    if (!s.history_pos.empty()) {
      for (std::int32_t item : s.history_pos)
        row.head(d) += base.item_embeddings.row(base.embedding_row(item));
      row.head(d) /= static_cast<double>(s.history_pos.size());
    }
    if (!s.history_neg.empty()) {
      Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(d);
      for (std::int32_t item : s.history_neg)
        pooled += base.item_embeddings.row(base.embedding_row(item));
      row.head(d) -= pooled / static_cast<double>(s.history_neg.size());
    }
    row.tail(d) = base.item_embeddings.row(base.embedding_row(s.target_item));
  }
  return u;
}

struct ForwardPass {
  Matrix u;      // n x 2d
  Matrix z_pre;  // n x h
  Matrix z;      // relu(z_pre)
  Vector p_raw;  // sigmoid outputs before clamping
};

ForwardPass run_forward(const Sample* const* samples, std::size_t n, const BaseParams& base,
                        const Effective& eff) {
  ForwardPass fwd;
  fwd.u = build_inputs(samples, n, base);
  fwd.z_pre = fwd.u * eff.w1;
  fwd.z_pre.rowwise() += base.b1.col(0).transpose();
  ensure_finite(fwd.z_pre, "layer W1 pre-activation");
  fwd.z = fwd.z_pre.cwiseMax(0.0);
  Vector out = fwd.z * eff.w2;
  out.array() += base.b2(0, 0);
  if (!out.allFinite()) throw NumericError("non-finite entries in layer W2 output");
  fwd.p_raw.resize(out.size());
  for (Index i = 0; i < out.size(); ++i) fwd.p_raw(i) = sigmoid(out(i));
  return fwd;
}

std::vector<const Sample*> to_pointers(std::span<const Sample> batch) {
  std::vector<const Sample*> ptrs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
  return ptrs;
}

double mean_bce(const Vector& p_raw, const Sample* const* samples, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = clamp_prob(p_raw(static_cast<Index>(i)));
    sum += samples[i]->label ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(n);
}

AdapterGradients chain_to_adapters(const AdapterSet& adapters, const Matrix& d_w1,
                                   const Matrix& d_w2) {
  AdapterGradients grads;
  for (const auto& [name, adapter] : adapters.entries) {
    const Matrix& d_eff = (name == kLayerW1) ? d_w1 : d_w2;
    LayerGrads g;
    g.a = adapter.scaling * (d_eff * adapter.b.transpose());
    g.b = adapter.scaling * (adapter.a.transpose() * d_eff);
    if (!g.a.allFinite() || !g.b.allFinite())
      throw NumericError("non-finite gradient on layer '" + name + "'");
    grads.emplace(name, std::move(g));
  }
  return grads;
}

BatchGradResult backward_impl(const Sample* const* samples, std::size_t n, const BaseParams& base,
                              const AdapterSet& adapters, Matrix* d_w1_out, Matrix* d_w2_out,
                              Vector* g_out, ForwardPass* fwd_out) {
  const Effective eff = apply_adapters(base, &adapters);
  ForwardPass fwd = run_forward(samples, n, base, eff);

  Vector g(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    g(static_cast<Index>(i)) =
        (fwd.p_raw(static_cast<Index>(i)) - static_cast<double>(samples[i]->label)) /
        static_cast<double>(n);

  Matrix d_w2 = fwd.z.transpose() * g;                      // h x 1
  Matrix d_z = g * eff.w2.transpose();                      // n x h
  Matrix d_z_pre = d_z.cwiseProduct(                        // relu mask
      (fwd.z_pre.array() > 0.0).cast<double>().matrix());
  Matrix d_w1 = fwd.u.transpose() * d_z_pre;                // 2d x h

  BatchGradResult result;
  result.loss = mean_bce(fwd.p_raw, samples, n);
  result.grads = chain_to_adapters(adapters, d_w1, d_w2);
  if (d_w1_out) *d_w1_out = std::move(d_w1);
  if (d_w2_out) *d_w2_out = std::move(d_w2);
  if (g_out) *g_out = std::move(g);
  if (fwd_out) *fwd_out = std::move(fwd);
  return result;
}

}  // namespace

Vector forward_batch(std::span<const Sample> batch, const BaseParams& base,
                     const AdapterSet* adapters) {
  const auto ptrs = to_pointers(batch);
  const Effective eff = apply_adapters(base, adapters);
  ForwardPass fwd = run_forward(ptrs.data(), ptrs.size(), base, eff);
  Vector p(fwd.p_raw.size());
  for (Index i = 0; i < p.size(); ++i) p(i) = clamp_prob(fwd.p_raw(i));
  return p;
}

double forward(const Sample& x, const BaseParams& base, const AdapterSet* adapters) {
  return forward_batch(std::span<const Sample>(&x, 1), base, adapters)(0);
}

double bce_loss(std::span<const Sample> batch, const BaseParams& base,
                const AdapterSet* adapters) {
  if (batch.empty()) throw UsageError("bce_loss: empty batch");
  const auto ptrs = to_pointers(batch);
  const Effective eff = apply_adapters(base, adapters);
  ForwardPass fwd = run_forward(ptrs.data(), ptrs.size(), base, eff);
  return mean_bce(fwd.p_raw, ptrs.data(), ptrs.size());
}

BatchGradResult backward_adapters(std::span<const Sample> batch, const BaseParams& base,
                                  const AdapterSet& adapters) {
  if (batch.empty()) throw UsageError("backward_adapters: empty batch");
  const auto ptrs = to_pointers(batch);
  return backward_impl(ptrs.data(), ptrs.size(), base, adapters, nullptr, nullptr, nullptr,
                       nullptr);
}

AdapterTrainResult train_adapter(std::span<const Sample> data, const BaseParams& base,
                                 const AdapterSet& initial, const TrainOptions& options,
                                 SeededRng& rng) {
  if (data.empty()) throw UsageError("train_adapter: empty data");
  AdapterTrainResult result;
  result.adapters = initial;
  if (options.epochs <= 0) return result;

  AdamOptions adam;
  adam.learning_rate = options.learning_rate;
  adam.weight_decay = options.weight_decay;
  std::map<std::string, std::pair<AdamState, AdamState>> states;
  for (const auto& [name, adapter] : result.adapters.entries)
    states.emplace(name, std::make_pair(
                             AdamState(name + ".A", adapter.a.rows(), adapter.a.cols(), adam),
                             AdamState(name + ".B", adapter.b.rows(), adapter.b.cols(), adam)));

  std::vector<std::int64_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Sample*> batch_ptrs;
  const std::size_t bs = static_cast<std::size_t>(std::max(1, options.batch_size));

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      batch_ptrs.clear();
      for (std::size_t i = start; i < stop; ++i)
        batch_ptrs.push_back(&data[static_cast<std::size_t>(order[i])]);
      BatchGradResult batch = backward_impl(batch_ptrs.data(), batch_ptrs.size(), base,
                                            result.adapters, nullptr, nullptr, nullptr, nullptr);
      loss_sum += batch.loss * static_cast<double>(batch_ptrs.size());
      for (auto& [name, grads] : batch.grads) {
        auto& [state_a, state_b] = states.at(name);
        LoraAdapter& adapter = result.adapters.entries.at(name);
        state_a.update(adapter.a, grads.a);
        state_b.update(adapter.b, grads.b);
      }
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  return result;
}

PretrainResult pretrain_base(std::span<const Sample> data, Index item_count,
                             const ModelConfig& config, const PretrainOptions& options,
                             SeededRng& rng) {
  if (data.empty()) throw UsageError("pretrain_base: empty data");
  const Index d = config.embedding_dim;
  const Index h = config.hidden_dim;

  // Vocabulary: every item observed in the pretraining data (targets and
  // histories), in ascending id order. Everything else maps to row 0.
  std::set<std::int32_t> seen;
  for (const Sample& s : data) {
    seen.insert(s.target_item);
    seen.insert(s.history_pos.begin(), s.history_pos.end());
    seen.insert(s.history_neg.begin(), s.history_neg.end());
  }
  seen.erase(0);

  PretrainResult result;
  BaseParams& base = result.base;
  base.config = config;
  base.item_to_row.assign(static_cast<std::size_t>(item_count) + 1, 0);
  std::int32_t next_row = 1;
  for (std::int32_t item : seen) {
    if (item < 0 || static_cast<std::size_t>(item) >= base.item_to_row.size())
      throw DatasetError("pretrain_base: item id " + std::to_string(item) +
                         " outside vocabulary of size " + std::to_string(item_count));
    base.item_to_row[static_cast<std::size_t>(item)] = next_row++;
  }
  const Index known = static_cast<Index>(next_row);

  // Draw order is fixed: embeddings, then W1, then W2. Row 0 stays zero.
  base.item_embeddings = Matrix::Zero(known, d);
  base.item_embeddings.bottomRows(known - 1) =
      rng.gaussian_matrix(known - 1, d, 1.0 / std::sqrt(static_cast<double>(d)));
  base.w1 = rng.gaussian_matrix(2 * d, h, 1.0 / std::sqrt(static_cast<double>(2 * d)));
  base.b1 = Matrix::Zero(h, 1);
  base.w2 = rng.gaussian_matrix(h, 1, 1.0 / std::sqrt(static_cast<double>(h)));
  base.b2 = Matrix::Zero(1, 1);

  AdamOptions adam;
  adam.learning_rate = options.learning_rate;
  adam.weight_decay = options.weight_decay;
  AdamState st_e("E", known, d, adam);
  AdamState st_w1("W1", 2 * d, h, adam);
  AdamState st_b1("b1", h, 1, adam);
  AdamState st_w2("W2", h, 1, adam);
  AdamState st_b2("b2", 1, 1, adam);

  std::vector<std::int64_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Sample*> batch_ptrs;
  const std::size_t bs = static_cast<std::size_t>(std::max(1, options.batch_size));
  const AdapterSet no_adapters;
  Matrix d_e(known, d);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      batch_ptrs.clear();
      for (std::size_t i = start; i < stop; ++i)
        batch_ptrs.push_back(&data[static_cast<std::size_t>(order[i])]);
      const std::size_t n = batch_ptrs.size();

      Matrix d_w1, d_w2;
      Vector g;
      ForwardPass fwd;
      BatchGradResult batch =
          backward_impl(batch_ptrs.data(), n, base, no_adapters, &d_w1, &d_w2, &g, &fwd);
      loss_sum += batch.loss * static_cast<double>(n);

      Matrix d_z_pre = (g * base.w2.transpose())
                           .cwiseProduct((fwd.z_pre.array() > 0.0).cast<double>().matrix());
      Matrix d_b1 = d_z_pre.colwise().sum().transpose();
      Matrix d_b2(1, 1);
      d_b2(0, 0) = g.sum();

      // Scatter input gradients back to the embedding rows that built u.
      Matrix d_u = d_z_pre * base.w1.transpose();  // n x 2d
      d_e.setZero();
      for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = *batch_ptrs[i];
        const auto row = d_u.row(static_cast<Index>(i));
        if (!s.history_pos.empty()) {
          const double inv = 1.0 / static_cast<double>(s.history_pos.size());
          for (std::int32_t item : s.history_pos)
            d_e.row(base.embedding_row(item)) += inv * row.head(d);
        }
        if (!s.history_neg.empty()) {
          const double inv = 1.0 / static_cast<double>(s.history_neg.size());
          for (std::int32_t item : s.history_neg)
            d_e.row(base.embedding_row(item)) -= inv * row.head(d);
        }
        d_e.row(base.embedding_row(s.target_item)) += row.tail(d);
      }

      st_e.update(base.item_embeddings, d_e);
      st_w1.update(base.w1, d_w1);
      st_b1.update(base.b1, d_b1);
      st_w2.update(base.w2, d_w2);
      st_b2.update(base.b2, d_b2);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  return result;
}

std::vector<std::uint8_t> base_params_bytes(const BaseParams& base) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.u16(kFormatVersion);
  w.str(kBaseSection);
  w.u32(static_cast<std::uint32_t>(base.config.embedding_dim));
  w.u32(static_cast<std::uint32_t>(base.config.hidden_dim));
  w.u32(static_cast<std::uint32_t>(base.config.history_len));
  w.u32(static_cast<std::uint32_t>(base.item_to_row.size()));
  for (std::int32_t row : base.item_to_row) w.u32(static_cast<std::uint32_t>(row));
  const auto mat = [&w](const Matrix& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    w.matrix(m);
  };
  mat(base.item_embeddings);
  mat(base.w1);
  mat(base.b1);
  mat(base.w2);
  mat(base.b2);
  return w.bytes();
}

std::uint64_t BaseParams::content_hash() const { return fnv1a64(base_params_bytes(*this)); }

void save_base_params(const BaseParams& base, const std::filesystem::path& path) {
  ByteWriter w;
  const auto bytes = base_params_bytes(base);
  w.raw(bytes.data(), bytes.size());
  w.write_file(path);
}

BaseParams load_base_params(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.require(4, "magic");
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion)
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  const std::size_t section_at = r.offset();
  if (r.str() != kBaseSection) throw FormatError("not a base-params checkpoint", section_at);

  BaseParams base;
  base.config.embedding_dim = static_cast<Index>(r.u32());
  base.config.hidden_dim = static_cast<Index>(r.u32());
  base.config.history_len = static_cast<int>(r.u32());
  const std::uint32_t vocab = r.u32();
  base.item_to_row.resize(vocab);
  for (auto& row : base.item_to_row) row = static_cast<std::int32_t>(r.u32());
  const auto mat = [&r](Matrix& m) {
    const Index rows = static_cast<Index>(r.u32());
    const Index cols = static_cast<Index>(r.u32());
    m = r.matrix(rows, cols);
  };
  mat(base.item_embeddings);
  mat(base.w1);
  mat(base.b1);
  mat(base.w2);
  mat(base.b2);
  if (!r.at_end()) throw FormatError("trailing bytes after base params", r.offset());
  return base;
}

}  // namespace lsat
