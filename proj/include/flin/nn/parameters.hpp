#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace flin::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// A trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Parameter(std::string n, Index rows, Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

/// Named collection of parameters. Entries are shared_ptr so two models can
/// hold the same tensor (the word embedding shared by the scorers).
class ParameterSet {
 public:
  Parameter& add(std::string name, Index rows, Index cols);
  void adopt(std::shared_ptr<Parameter> p);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  std::shared_ptr<Parameter> shared(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::shared_ptr<Parameter>>& items() const { return items_; }
  std::size_t scalar_count() const;

  void zero_grad();
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);
  bool all_finite() const;

 private:
  std::vector<std::shared_ptr<Parameter>> items_;
};

void init_uniform(Parameter& p, double bound, Rng& rng);

/// Binary archive: magic, count, then (name, rows, cols, raw doubles) per
/// entry. Round-trips bit-exactly.
void save_weights(const ParameterSet& params, const std::filesystem::path& path);
/// Overwrites values of existing entries by name; shapes must match. Entries
/// in the archive with no counterpart are an error.
void load_weights(ParameterSet& params, const std::filesystem::path& path);

}  // namespace flin::nn
