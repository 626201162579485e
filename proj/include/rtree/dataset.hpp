#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rtree {

// Dense row-major feature matrix plus labels. Classification code expects
// labels in {0,1}; regression losses accept any finite label.
class Dataset {
public:
  Dataset() = default;
  Dataset(std::vector<double> features, std::vector<double> labels,
          std::size_t feature_count);

  std::size_t example_count() const { return labels_.size(); }
  std::size_t feature_count() const { return feature_count_; }

  double feature(std::size_t row, std::size_t col) const {
    return features_[row * feature_count_ + col];
  }
  double label(std::size_t row) const { return labels_[row]; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * feature_count_, feature_count_};
  }
  std::span<const double> labels() const { return labels_; }

  void set_feature(std::size_t row, std::size_t col, double v) {
    features_[row * feature_count_ + col] = v;
  }

private:
  std::vector<double> features_;  // example_count x feature_count
  std::vector<double> labels_;
  std::size_t feature_count_ = 0;
};

// Reads a LIBSVM-format file: each line "label idx:value ...", indices
// 1-based and strictly increasing within a line. Unlisted features are 0.
// The feature count is the largest index seen anywhere in the file.
// Throws std::runtime_error with the offending line number on malformed
// input, and if the file contains no examples.
Dataset load_libsvm(const std::string& path);

// Per-feature min/max learned from training data, used to map features
// into [0,1]. A constant feature maps to 0.
struct Scaler {
  std::vector<double> min;
  std::vector<double> max;
};

Scaler fit_scaler(const Dataset& train);

// (x - min) / (max - min), clamped to [0,1] so unseen out-of-range values
// stay inside the unit box.
Dataset apply_scaler(const Scaler& s, const Dataset& d);

void save_scaler(const Scaler& s, const std::string& path);
Scaler load_scaler(const std::string& path);

// Perturbation radius for robust training, in normalized feature units.
// Either one scalar for all features or one value per feature.
class RobustConfig {
public:
  RobustConfig() : scalar_(0.0), is_scalar_(true) {}
  explicit RobustConfig(double eps);
  explicit RobustConfig(std::vector<double> per_feature);

  double epsilon(std::size_t feature) const {
    return is_scalar_ ? scalar_ : per_feature_[feature];
  }
  bool is_scalar() const { return is_scalar_; }
  double scalar_value() const { return scalar_; }
  const std::vector<double>& per_feature_values() const { return per_feature_; }

  // True when any feature gets a positive radius (i.e. robust scoring
  // actually differs from the natural one).
  bool any_positive() const;

  // Vector configs must match the data dimension; throws otherwise.
  void check_dimension(std::size_t feature_count) const;

  // Parses "0.3" or "0.1,0.2,0.05" (one value per feature).
  static RobustConfig parse(const std::string& text);

private:
  double scalar_ = 0.0;
  std::vector<double> per_feature_;
  bool is_scalar_ = true;
};

}  // namespace rtree
