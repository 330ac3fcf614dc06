#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flipkit/csv.hpp"
#include "flipkit/errors.hpp"
#include "flipkit/numerics.hpp"

// Randomized-benchmarking decay models and fits (reference + interleaved),
// coherence-limited fidelity bounds, and series statistics. RB data enters as
// sequence fidelities; no Clifford simulation happens here.
namespace flipkit::rb {

// Sequence-fidelity samples per sequence length; d = 2^N is the Hilbert
// dimension the error rate refers to.
struct RBDataset {
  std::vector<long> lengths;
  std::vector<std::vector<double>> fidelities;  // fidelities[i] at lengths[i]
  int dim = 2;
};

inline void validate(const RBDataset& dataset) {
  if (dataset.lengths.size() != dataset.fidelities.size()) {
    throw domain_error("rb dataset: length and sample-group counts differ");
  }
  if (dataset.lengths.size() < 3) {
    throw domain_error("rb dataset: need at least 3 distinct sequence lengths");
  }
  if (dataset.dim < 2) throw domain_error("rb dataset: dimension must be >= 2");
  for (std::size_t i = 0; i < dataset.lengths.size(); ++i) {
    if (dataset.lengths[i] <= 0) throw domain_error("rb dataset: lengths must be positive");
    if (i > 0 && dataset.lengths[i] <= dataset.lengths[i - 1]) {
      throw domain_error("rb dataset: lengths must be strictly increasing");
    }
    if (dataset.fidelities[i].empty()) {
      throw domain_error("rb dataset: empty sample group");
    }
    for (double f : dataset.fidelities[i]) {
      if (!(f >= 0.0 && f <= 1.0)) {
        throw domain_error("rb dataset: fidelities must lie in [0, 1]");
      }
    }
  }
}

// F(m) = A p^m + B
inline double decay_model(double m, double a, double b, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw domain_error("decay_model: p must lie in (0, 1]");
  if (m < 0.0) throw domain_error("decay_model: m must be non-negative");
  return a * std::pow(p, m) + b;
}

// r = (1 - p)(d - 1)/d
inline double error_from_decay(double p, int dim) {
  if (dim < 2) throw domain_error("error_from_decay: dimension must be >= 2");
  return (1.0 - p) * static_cast<double>(dim - 1) / static_cast<double>(dim);
}

inline double decay_from_error(double r, int dim) {
  if (dim < 2) throw domain_error("decay_from_error: dimension must be >= 2");
  return 1.0 - r * static_cast<double>(dim) / static_cast<double>(dim - 1);
}

struct RBFitResult {
  double a = 0.0, b = 0.0, p = 0.0, r = 0.0;
  double a_err = 0.0, b_err = 0.0, p_err = 0.0, r_err = 0.0;
  double residual_rms = 0.0;
};

// Plain nonlinear least squares on all (m, F) points. Initial values per the
// log-decay rule: B0 = mean F at the longest length, A0 = mean F at the
// shortest minus B0, p0 from a two-point log slope. Standard errors come from
// the fit covariance.
inline RBFitResult fit_reference(const RBDataset& dataset) {
  validate(dataset);
  const std::size_t n_lengths = dataset.lengths.size();
  std::vector<double> length_mean(n_lengths);
  std::size_t n_points = 0;
  for (std::size_t i = 0; i < n_lengths; ++i) {
    double sum = 0.0;
    for (double f : dataset.fidelities[i]) sum += f;
    length_mean[i] = sum / static_cast<double>(dataset.fidelities[i].size());
    n_points += dataset.fidelities[i].size();
  }

  const double b0 = length_mean.back();
  const double a0 = length_mean.front() - b0;
  const std::size_t i_mid = n_lengths / 2;
  double p0 = 0.99;
  const double top = length_mean[i_mid] - b0;
  const double bottom = length_mean.front() - b0;
  if (top > 0.0 && bottom > 0.0 && dataset.lengths[i_mid] != dataset.lengths.front()) {
    p0 = std::exp(std::log(top / bottom) /
                  static_cast<double>(dataset.lengths[i_mid] - dataset.lengths.front()));
  }
  p0 = std::clamp(p0, 1e-6, 1.0);

  std::vector<double> ms, fs;
  ms.reserve(n_points);
  fs.reserve(n_points);
  for (std::size_t i = 0; i < n_lengths; ++i) {
    for (double f : dataset.fidelities[i]) {
      ms.push_back(static_cast<double>(dataset.lengths[i]));
      fs.push_back(f);
    }
  }
  const auto residuals = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(ms.size()));
    for (std::size_t k = 0; k < ms.size(); ++k) {
      r[static_cast<Eigen::Index>(k)] = fs[k] - (x[0] * std::pow(x[2], ms[k]) + x[1]);
    }
    return r;
  };
  Eigen::VectorXd x0(3);
  x0 << a0, b0, p0;
  const auto fit = numerics::levenberg_marquardt(residuals, x0);
  if (!fit.converged) throw numerics_error("fit_reference: fit did not converge");

  RBFitResult result;
  result.a = fit.params[0];
  result.b = fit.params[1];
  result.p = fit.params[2];
  if (!(result.p > 0.0 && result.p <= 1.0)) {
    throw numerics_error("fit_reference: fitted p outside (0, 1]");
  }
  result.a_err = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
  result.b_err = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
  result.p_err = std::sqrt(std::max(fit.covariance(2, 2), 0.0));
  const double scale = static_cast<double>(dataset.dim - 1) / static_cast<double>(dataset.dim);
  result.r = (1.0 - result.p) * scale;
  result.r_err = result.p_err * scale;
  result.residual_rms = std::sqrt(fit.ssr / static_cast<double>(ms.size()));
  return result;
}

// r_gate = (d-1)(1 - p_int/p_ref)/d; negative (reported signed) when the
// interleaved decay is slower than the reference.
inline double interleaved_error(double p_ref, double p_int, int dim) {
  if (dim < 2) throw domain_error("interleaved_error: dimension must be >= 2");
  if (!(p_ref > 0.0 && p_ref <= 1.0) || !(p_int > 0.0)) {
    throw domain_error("interleaved_error: decays must lie in (0, 1]");
  }
  return (1.0 - p_int / p_ref) * static_cast<double>(dim - 1) / static_cast<double>(dim);
}

inline bool interleaved_inverted(double p_ref, double p_int) { return p_int > p_ref; }

// 1/T_phi = 1/T2* - 1/(2 T1); +infinity at the lifetime limit T2* = 2 T1 and
// (with the violation flag) beyond it.
inline double tphi_from(double t1_us, double t2_star_us) {
  if (!(t1_us > 0.0) || !(t2_star_us > 0.0)) {
    throw domain_error("tphi_from: coherence times must be positive");
  }
  const double rate = 1.0 / t2_star_us - 1.0 / (2.0 * t1_us);
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / rate;
}

struct CoherenceRecord {
  double t1_us = 0.0;
  double t2_star_us = 0.0;
  double tphi_us = 0.0;
  bool t2_limit_violated = false;  // T2* > 2 T1 (clamped to infinite T_phi)
};

inline CoherenceRecord make_coherence_record(double t1_us, double t2_star_us) {
  CoherenceRecord record;
  record.t1_us = t1_us;
  record.t2_star_us = t2_star_us;
  record.tphi_us = tphi_from(t1_us, t2_star_us);
  record.t2_limit_violated = t2_star_us > 2.0 * t1_us;
  return record;
}

// Coherence-limited average gate fidelity for an N-qubit gate:
// F = 1 - d tau / (2 (d + 1)) * sum_k (1/T1_k + 1/Tphi_k), d = 2^N.
inline double coherence_limit(int n_qubits, double gate_time_ns,
                              const std::vector<CoherenceRecord>& records) {
  if (n_qubits < 1) throw domain_error("coherence_limit: need at least one qubit");
  if (records.size() != static_cast<std::size_t>(n_qubits)) {
    throw domain_error("coherence_limit: need exactly one coherence record per qubit");
  }
  if (gate_time_ns < 0.0) throw domain_error("coherence_limit: gate time must be non-negative");
  const double d = std::pow(2.0, n_qubits);
  double rate_sum = 0.0;  // 1/us
  for (const auto& record : records) {
    if (!(record.t1_us > 0.0)) throw domain_error("coherence_limit: T1 must be positive");
    rate_sum += 1.0 / record.t1_us;
    if (std::isfinite(record.tphi_us)) {
      if (!(record.tphi_us > 0.0)) throw domain_error("coherence_limit: T_phi must be positive");
      rate_sum += 1.0 / record.tphi_us;
    }
  }
  const double tau_us = gate_time_ns * 1e-3;
  return 1.0 - d * tau_us / (2.0 * (d + 1.0)) * rate_sum;
}

// Deterministic synthetic dataset generator; fidelities are clamped to [0,1].
inline RBDataset synth_dataset(double p, double a, double b, const std::vector<long>& lengths,
                               int sequences_per_length, double noise_sigma, std::uint64_t seed,
                               int dim = 2) {
  if (!(p > 0.0 && p <= 1.0)) throw domain_error("synth_dataset: p must lie in (0, 1]");
  if (sequences_per_length < 1) {
    throw domain_error("synth_dataset: need at least one sequence per length");
  }
  if (noise_sigma < 0.0) throw domain_error("synth_dataset: sigma must be non-negative");
  RBDataset dataset;
  dataset.lengths = lengths;
  dataset.dim = dim;
  numerics::SeededRng rng(seed);
  for (long m : lengths) {
    std::vector<double> samples(static_cast<std::size_t>(sequences_per_length));
    const double mean = decay_model(static_cast<double>(m), a, b, p);
    for (auto& sample : samples) {
      sample = std::clamp(mean + noise_sigma * rng.normal(), 0.0, 1.0);
    }
    dataset.fidelities.push_back(std::move(samples));
  }
  validate(dataset);
  return dataset;
}

struct SeriesStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) normalization
};

inline SeriesStats series_stats(const std::vector<double>& samples) {
  const auto stats = numerics::mean_sample_std(samples);
  return {stats.mean, stats.stddev};
}

// Dataset file: CSV columns (m, sequence_index, fidelity).
inline RBDataset load_dataset_csv(std::string_view text, int dim,
                                  std::string_view source_name = "rb dataset") {
  const csv::Table table = csv::parse(text, source_name);
  const std::size_t c_m = csv::column_index(table, "m", source_name);
  const std::size_t c_f = csv::column_index(table, "fidelity", source_name);
  csv::column_index(table, "sequence_index", source_name);  // schema check only
  if (table.rows.empty()) throw parse_error(std::string(source_name) + ": no data rows");

  std::vector<long> lengths;
  std::vector<std::vector<double>> groups;
  for (const auto& row : table.rows) {
    const long m = csv::to_long(row[c_m], "m");
    const double f = csv::to_double(row[c_f], "fidelity");
    const auto it = std::lower_bound(lengths.begin(), lengths.end(), m);
    const std::size_t pos = static_cast<std::size_t>(it - lengths.begin());
    if (it == lengths.end() || *it != m) {
      lengths.insert(it, m);
      groups.insert(groups.begin() + static_cast<std::ptrdiff_t>(pos), std::vector<double>{});
    }
    groups[pos].push_back(f);
  }
  RBDataset dataset{std::move(lengths), std::move(groups), dim};
  validate(dataset);
  return dataset;
}

}  // namespace flipkit::rb
