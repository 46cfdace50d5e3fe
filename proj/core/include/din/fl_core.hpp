#pragma once

#include <cstdint>
#include <vector>

#include "din/codec.hpp"
#include "din/common.hpp"
#include "din/digest.hpp"
#include "din/rng.hpp"

namespace din {
namespace fl {

enum class ModelKind : std::uint8_t {
  linear_regression = 1,
  logistic_regression = 2,
};

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

// Weight vector; the last entry is the bias term. A model of dimension d
// consumes feature rows of width d-1.
struct ModelParams {
  ModelKind kind = ModelKind::linear_regression;
  std::vector<double> weights;

  std::size_t dim() const { return weights.size(); }
  double predict_raw(const std::vector<double>& row) const;   // w . [x, 1]
  double predict(const std::vector<double>& row) const;       // sigmoid applied for logistic

  // Canonical wire form: magic, kind, dimension, then fixed-width little
  // endian field elements through the aggregation codec. Weights are
  // quantized to the codec grid, so equal models serialize to equal
  // bytes and the content id is stable across publishers.
  std::vector<std::uint8_t> serialize(const FixedPointCodec& codec) const;
  static ModelParams deserialize(const std::vector<std::uint8_t>& bytes,
                                 const FixedPointCodec& codec);
};

// Local training data. Deliberately has no serializer: rows never leave
// the owning agent in any wire format.
struct PrivateDataset {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;

  std::size_t size() const { return rows.size(); }
  std::size_t feature_dim() const { return rows.empty() ? 0 : rows[0].size(); }
};

// Benchmark data held by the task owner and the secure environment.
struct ControlDataset {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;

  std::size_t size() const { return rows.size(); }
  std::size_t feature_dim() const { return rows.empty() ? 0 : rows[0].size(); }

  // header (row count, feature dim), then row-major features and labels
  // as little-endian doubles
  std::vector<std::uint8_t> serialize() const;
  static ControlDataset deserialize(const std::vector<std::uint8_t>& bytes);
  Digest256 digest() const { return sha256(serialize()); }
};

// ---- training ----

// Full-batch gradient descent for `epochs` passes at fixed step size.
ModelParams local_train(const ModelParams& start, const PrivateDataset& data,
                        std::uint32_t epochs, double learning_rate);

double mean_squared_error(const ModelParams& model, const std::vector<std::vector<double>>& rows,
                          const std::vector<double>& labels);
double accuracy(const ModelParams& model, const std::vector<std::vector<double>>& rows,
                const std::vector<double>& labels);

// loss gradient at the given model, exposed for finite-difference checks
std::vector<double> loss_gradient(const ModelParams& model, const PrivateDataset& data);
double loss(const ModelParams& model, const PrivateDataset& data);

// ---- aggregation ----

// Weighted elementwise mean of updates. Weights must be nonnegative with
// a positive sum.
std::vector<double> fedavg(const std::vector<std::vector<double>>& updates,
                           const std::vector<double>& weights);

struct WeightSum {
  std::vector<double> sum;   // elementwise sum over a subgroup
  std::uint32_t count = 0;   // contributing updates
};

// Count-weighted combination of subgroup sums: sum of sums over sum of
// counts. Equals flat fedavg over all contributing updates.
std::vector<double> master_aggregate(const std::vector<WeightSum>& parts);

// Published subgroup aggregate: round, count and the raw sum vector,
// wide-encoded (sums exceed the single-update clamp range by design).
struct AggregateBlob {
  std::uint32_t round = 0;
  WeightSum part;

  std::vector<std::uint8_t> serialize(const FixedPointCodec& codec) const;
  static AggregateBlob deserialize(const std::vector<std::uint8_t>& bytes,
                                   const FixedPointCodec& codec);
};

// Recompute the count-weighted combination and compare against a
// published global, elementwise within the codec quantization step.
bool verify_global_mean(const std::vector<WeightSum>& parts,
                        const std::vector<double>& published,
                        const FixedPointCodec& codec);

// ---- synthetic population ----

struct PopulationSpec {
  std::uint32_t participants = 0;
  std::uint32_t samples_per_participant = 0;
  std::uint32_t feature_dim = 1;         // model dim is feature_dim + 1
  double label_noise = 0.0;
  double heterogeneity = 0.0;            // 0 IID .. 1 full cluster shift
  std::uint32_t clusters = 1;
  double cluster_shift = 2.0;            // mean distance between adjacent clusters at heterogeneity 1
  std::uint32_t control_samples = 0;
  ModelKind kind = ModelKind::linear_regression;
};

struct Population {
  std::vector<PrivateDataset> participants;
  ControlDataset control;
  ModelParams truth;
};

// Deterministic under the rng seed; participant p's data depends only on
// the "data"/p substream, so toggling other agents never perturbs it.
Population generate_population(const PopulationSpec& spec, const Rng& rng);

// Oracle helper: all participant rows pooled into one dataset, for
// centralized gradient descent baselines.
PrivateDataset pool_datasets(const std::vector<PrivateDataset>& parts);

}  // namespace fl
}  // namespace din
