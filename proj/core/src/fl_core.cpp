#include "din/fl_core.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace din {
namespace fl {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear_regression: return "linear_regression";
    case ModelKind::logistic_regression: return "logistic_regression";
  }
  return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "linear_regression") return ModelKind::linear_regression;
  if (name == "logistic_regression") return ModelKind::logistic_regression;
  fail(ErrorCode::InvalidConfig, "unknown model kind '" + name + "'");
}

static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double ModelParams::predict_raw(const std::vector<double>& row) const {
  if (row.size() + 1 != weights.size())
    fail(ErrorCode::DimensionMismatch, "row width " + std::to_string(row.size()) +
                                           " for model dim " + std::to_string(weights.size()));
  double acc = weights.back();  // bias
  for (std::size_t j = 0; j < row.size(); ++j) acc += weights[j] * row[j];
  return acc;
}

double ModelParams::predict(const std::vector<double>& row) const {
  double z = predict_raw(row);
  return kind == ModelKind::logistic_regression ? sigmoid(z) : z;
}

static void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
static void append_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
static void append_f64(std::vector<std::uint8_t>& buf, double x) {
  append_u64(buf, std::bit_cast<std::uint64_t>(x));
}
static std::uint32_t read_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
static std::uint64_t read_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
static double read_f64(const std::uint8_t* p) { return std::bit_cast<double>(read_u64(p)); }

std::vector<std::uint8_t> ModelParams::serialize(const FixedPointCodec& codec) const {
  std::vector<std::uint8_t> buf;
  buf.reserve(9 + 8 * weights.size());
  buf.push_back('D'); buf.push_back('I'); buf.push_back('N'); buf.push_back('M');
  buf.push_back(static_cast<std::uint8_t>(kind));
  append_u32(buf, static_cast<std::uint32_t>(weights.size()));
  for (double w : weights) append_u64(buf, codec.encode(w));
  return buf;
}

ModelParams ModelParams::deserialize(const std::vector<std::uint8_t>& bytes,
                                     const FixedPointCodec& codec) {
  if (bytes.size() < 9 || std::memcmp(bytes.data(), "DINM", 4) != 0)
    fail(ErrorCode::OutOfRange, "not a model blob");
  ModelParams m;
  m.kind = static_cast<ModelKind>(bytes[4]);
  if (m.kind != ModelKind::linear_regression && m.kind != ModelKind::logistic_regression)
    fail(ErrorCode::OutOfRange, "unknown model kind byte");
  std::uint32_t dim = read_u32(bytes.data() + 5);
  if (bytes.size() != 9 + 8ull * dim) fail(ErrorCode::OutOfRange, "model blob truncated");
  m.weights.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i)
    m.weights[i] = codec.decode(read_u64(bytes.data() + 9 + 8ull * i));
  return m;
}

std::vector<std::uint8_t> ControlDataset::serialize() const {
  std::vector<std::uint8_t> buf;
  std::uint32_t n = static_cast<std::uint32_t>(rows.size());
  std::uint32_t d = static_cast<std::uint32_t>(feature_dim());
  buf.reserve(8 + 8ull * n * (d + 1));
  append_u32(buf, n);
  append_u32(buf, d);
  for (const auto& row : rows)
    for (double x : row) append_f64(buf, x);
  for (double y : labels) append_f64(buf, y);
  return buf;
}

ControlDataset ControlDataset::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) fail(ErrorCode::OutOfRange, "control blob truncated");
  std::uint32_t n = read_u32(bytes.data());
  std::uint32_t d = read_u32(bytes.data() + 4);
  if (bytes.size() != 8 + 8ull * n * (d + 1))
    fail(ErrorCode::OutOfRange, "control blob truncated");
  ControlDataset out;
  out.rows.assign(n, std::vector<double>(d));
  out.labels.resize(n);
  const std::uint8_t* p = bytes.data() + 8;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j, p += 8) out.rows[i][j] = read_f64(p);
  for (std::uint32_t i = 0; i < n; ++i, p += 8) out.labels[i] = read_f64(p);
  return out;
}

double loss(const ModelParams& model, const PrivateDataset& data) {
  if (model.kind == ModelKind::logistic_regression) {
    // log loss
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double p = model.predict(data.rows[i]);
      const double eps = 1e-12;
      if (p < eps) p = eps;
      if (p > 1.0 - eps) p = 1.0 - eps;
      acc += data.labels[i] > 0.5 ? -std::log(p) : -std::log(1.0 - p);
    }
    return acc / static_cast<double>(data.size());
  }
  return mean_squared_error(model, data.rows, data.labels);
}

std::vector<double> loss_gradient(const ModelParams& model, const PrivateDataset& data) {
  if (data.size() == 0) fail(ErrorCode::EmptyInput, "gradient of empty dataset");
  std::size_t dim = model.dim();
  if (data.feature_dim() + 1 != dim)
    fail(ErrorCode::DimensionMismatch, "dataset width " + std::to_string(data.feature_dim()) +
                                           " for model dim " + std::to_string(dim));
  std::vector<double> grad(dim, 0.0);
  double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double err = model.predict(data.rows[i]) - data.labels[i];
    // d(mse)/dw carries the factor 2, log loss does not
    double g = model.kind == ModelKind::linear_regression ? 2.0 * err / n : err / n;
    for (std::size_t j = 0; j + 1 < dim; ++j) grad[j] += g * data.rows[i][j];
    grad[dim - 1] += g;  // bias input is 1
  }
  return grad;
}

ModelParams local_train(const ModelParams& start, const PrivateDataset& data,
                        std::uint32_t epochs, double learning_rate) {
  if (data.size() == 0) fail(ErrorCode::EmptyInput, "training on empty dataset");
  if (data.feature_dim() + 1 != start.dim())
    fail(ErrorCode::DimensionMismatch, "dataset width " + std::to_string(data.feature_dim()) +
                                           " for model dim " + std::to_string(start.dim()));
  ModelParams model = start;
  for (std::uint32_t e = 0; e < epochs; ++e) {
    std::vector<double> grad = loss_gradient(model, data);
    for (std::size_t j = 0; j < model.weights.size(); ++j)
      model.weights[j] -= learning_rate * grad[j];
  }
  return model;
}

double mean_squared_error(const ModelParams& model, const std::vector<std::vector<double>>& rows,
                          const std::vector<double>& labels) {
  if (rows.empty()) fail(ErrorCode::EmptyInput, "mse of empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double err = model.predict_raw(rows[i]) - labels[i];
    acc += err * err;
  }
  return acc / static_cast<double>(rows.size());
}

double accuracy(const ModelParams& model, const std::vector<std::vector<double>>& rows,
                const std::vector<double>& labels) {
  if (rows.empty()) fail(ErrorCode::EmptyInput, "accuracy of empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool predicted = model.predict(rows[i]) > 0.5;
    bool actual = labels[i] > 0.5;
    if (predicted == actual) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

std::vector<double> fedavg(const std::vector<std::vector<double>>& updates,
                           const std::vector<double>& weights) {
  if (updates.empty()) fail(ErrorCode::EmptyInput, "fedavg of nothing");
  if (updates.size() != weights.size())
    fail(ErrorCode::DimensionMismatch, "weights count mismatch");
  std::size_t dim = updates[0].size();
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) fail(ErrorCode::OutOfRange, "negative fedavg weight");
    total += w;
  }
  if (total <= 0.0) fail(ErrorCode::EmptyInput, "fedavg weights sum to zero");

  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (updates[i].size() != dim) fail(ErrorCode::DimensionMismatch, "update dim mismatch");
    for (std::size_t j = 0; j < dim; ++j) out[j] += weights[i] * updates[i][j];
  }
  for (double& x : out) x /= total;
  return out;
}

std::vector<double> master_aggregate(const std::vector<WeightSum>& parts) {
  if (parts.empty()) fail(ErrorCode::EmptyInput, "aggregate of nothing");
  std::size_t dim = parts[0].sum.size();
  std::uint64_t total = 0;
  std::vector<double> out(dim, 0.0);
  for (const auto& part : parts) {
    if (part.sum.size() != dim) fail(ErrorCode::DimensionMismatch, "sum dim mismatch");
    total += part.count;
    for (std::size_t j = 0; j < dim; ++j) out[j] += part.sum[j];
  }
  if (total == 0) fail(ErrorCode::EmptyInput, "aggregate with zero count");
  for (double& x : out) x /= static_cast<double>(total);
  return out;
}

std::vector<std::uint8_t> AggregateBlob::serialize(const FixedPointCodec& codec) const {
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + 8 * part.sum.size());
  buf.push_back('D'); buf.push_back('I'); buf.push_back('N'); buf.push_back('A');
  append_u32(buf, round);
  append_u32(buf, part.count);
  append_u32(buf, static_cast<std::uint32_t>(part.sum.size()));
  for (double x : part.sum) append_u64(buf, codec.encode_wide(x));
  return buf;
}

AggregateBlob AggregateBlob::deserialize(const std::vector<std::uint8_t>& bytes,
                                         const FixedPointCodec& codec) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "DINA", 4) != 0)
    fail(ErrorCode::OutOfRange, "not an aggregate blob");
  AggregateBlob blob;
  blob.round = read_u32(bytes.data() + 4);
  blob.part.count = read_u32(bytes.data() + 8);
  std::uint32_t dim = read_u32(bytes.data() + 12);
  if (bytes.size() != 16 + 8ull * dim) fail(ErrorCode::OutOfRange, "aggregate blob truncated");
  blob.part.sum.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i)
    blob.part.sum[i] = codec.decode(read_u64(bytes.data() + 16 + 8ull * i));
  return blob;
}

bool verify_global_mean(const std::vector<WeightSum>& parts,
                        const std::vector<double>& published,
                        const FixedPointCodec& codec) {
  std::vector<double> recomputed = master_aggregate(parts);
  if (recomputed.size() != published.size()) return false;
  double tol = 1.0 / static_cast<double>(codec.scale);
  for (std::size_t j = 0; j < recomputed.size(); ++j)
    if (std::abs(recomputed[j] - published[j]) > tol) return false;
  return true;
}

Population generate_population(const PopulationSpec& spec, const Rng& rng) {
  if (spec.clusters == 0) fail(ErrorCode::InvalidConfig, "population needs >= 1 cluster");
  if (spec.participants == 0 || spec.samples_per_participant == 0)
    fail(ErrorCode::InvalidConfig, "empty population");

  std::size_t dim = spec.feature_dim + 1;
  Population pop;
  pop.truth.kind = spec.kind;
  pop.truth.weights.resize(dim);
  Rng truth_rng = rng.fork("truth");
  for (double& w : pop.truth.weights) w = truth_rng.uniform_double(-1.0, 1.0);

  auto cluster_mean = [&](std::uint32_t cluster) {
    double centered = static_cast<double>(cluster) -
                      static_cast<double>(spec.clusters - 1) / 2.0;
    return centered * spec.heterogeneity * spec.cluster_shift;
  };

  auto sample_row = [&](Rng& r, std::uint32_t cluster) {
    std::vector<double> row(spec.feature_dim);
    double mean = cluster_mean(cluster);
    for (double& x : row) x = mean + r.gaussian();
    return row;
  };

  auto sample_label = [&](Rng& r, const std::vector<double>& row) {
    double raw = pop.truth.predict_raw(row);
    if (spec.kind == ModelKind::logistic_regression) {
      double p = 1.0 / (1.0 + std::exp(-raw));
      // label noise flips a coin-sized fraction of labels
      double y = r.uniform_double() < p ? 1.0 : 0.0;
      if (spec.label_noise > 0.0 && r.chance(spec.label_noise)) y = 1.0 - y;
      return y;
    }
    return raw + spec.label_noise * r.gaussian();
  };

  pop.participants.resize(spec.participants);
  for (std::uint32_t p = 0; p < spec.participants; ++p) {
    Rng r = rng.fork("data", p);
    std::uint32_t cluster = p % spec.clusters;
    PrivateDataset& ds = pop.participants[p];
    ds.rows.reserve(spec.samples_per_participant);
    ds.labels.reserve(spec.samples_per_participant);
    for (std::uint32_t i = 0; i < spec.samples_per_participant; ++i) {
      ds.rows.push_back(sample_row(r, cluster));
      ds.labels.push_back(sample_label(r, ds.rows.back()));
    }
  }

  Rng cr = rng.fork("control");
  pop.control.rows.reserve(spec.control_samples);
  pop.control.labels.reserve(spec.control_samples);
  for (std::uint32_t i = 0; i < spec.control_samples; ++i) {
    std::uint32_t cluster = i % spec.clusters;
    pop.control.rows.push_back(sample_row(cr, cluster));
    pop.control.labels.push_back(sample_label(cr, pop.control.rows.back()));
  }
  return pop;
}

PrivateDataset pool_datasets(const std::vector<PrivateDataset>& parts) {
  PrivateDataset out;
  for (const auto& part : parts) {
    out.rows.insert(out.rows.end(), part.rows.begin(), part.rows.end());
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  }
  return out;
}

}  // namespace fl
}  // namespace din
