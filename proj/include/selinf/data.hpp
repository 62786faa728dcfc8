#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "selinf/errors.hpp"

namespace selinf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Noise covariance of the response: either sigma^2 * I or a general SPD
/// Sigma. A general Sigma is factored once at construction and every
/// downstream Sigma*eta solve reuses the factor.
class NoiseModel {
 public:
  static NoiseModel isotropic(double sigma2);
  static NoiseModel general(Matrix sigma);

  bool is_isotropic() const { return isotropic_; }
  int dim() const { return isotropic_ ? -1 : static_cast<int>(sigma_.rows()); }
  double sigma2() const { return sigma2_; }

  /// Sigma * v.
  Vector apply(const Vector& v) const;
  /// v' Sigma v (always > 0 for v != 0).
  double quad(const Vector& v) const;
  /// Lower Cholesky factor times v, for sampling N(0, Sigma).
  Vector half_apply(const Vector& v) const;

 private:
  NoiseModel() = default;
  bool isotropic_ = true;
  double sigma2_ = 1.0;
  Matrix sigma_;
  Eigen::LLT<Matrix> llt_;
};

/// Immutable regression problem: design X (n x p), response y (n), optional
/// noise model, optional column labels.
struct RegressionData {
  Matrix X;
  Vector y;
  std::optional<NoiseModel> noise;
  std::vector<std::string> names;
  bool standardized = false;
  std::vector<std::string> warnings;

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }

  /// Validates n,p >= 1, no all-zero column, y length, names length; records
  /// a warning (not an error) when two columns coincide up to sign.
  static RegressionData make(Matrix X, Vector y,
                             std::optional<NoiseModel> noise = std::nullopt,
                             std::vector<std::string> names = {});

  const NoiseModel& require_noise() const;
};

/// A linear functional eta'y of the response, with its variance eta'Sigma eta
/// precomputed against a noise model.
struct Contrast {
  Vector eta;
  std::string label;
  double scale = 0.0;  // eta' Sigma eta

  static Contrast make(Vector eta, const NoiseModel& noise,
                       std::string label = {});
};

/// Provenance of a selection event.
struct EventMeta {
  std::string method;
  std::vector<int> active;      // selected indices, 0-based
  std::vector<int> signs;       // +1/-1 per active index
  double lambda = 0.0;
  double gamma = 0.0;
  std::vector<int> step_order;  // for order-aware events
  std::string note;
};

/// Affine selection event {y : A y <= b}. Zero rows means the whole space.
struct Polytope {
  Matrix A;
  Vector b;
  EventMeta meta;

  int rows() const { return static_cast<int>(A.rows()); }
  int dim() const { return static_cast<int>(A.cols()); }

  static Polytope make(Matrix A, Vector b, EventMeta meta = {});
};

/// Opaque selector: reports whether a response reproduces the reference
/// outcome. Used by the blackbox inference path.
struct BlackboxSelector {
  std::function<bool(const Vector&)> same_outcome;
  std::string description;
};

/// A selection event: one polytope, a union of polytopes over the same
/// ambient dimension, or a blackbox membership oracle.
class SelectionEvent {
 public:
  static SelectionEvent single(Polytope poly);
  static SelectionEvent union_of(std::vector<Polytope> polys);
  static SelectionEvent blackbox(BlackboxSelector selector);

  bool is_single() const { return std::holds_alternative<Polytope>(v_); }
  bool is_union() const {
    return std::holds_alternative<std::vector<Polytope>>(v_);
  }
  bool is_blackbox() const {
    return std::holds_alternative<BlackboxSelector>(v_);
  }

  const Polytope& poly() const { return std::get<Polytope>(v_); }
  const std::vector<Polytope>& members() const {
    return std::get<std::vector<Polytope>>(v_);
  }
  const BlackboxSelector& selector() const {
    return std::get<BlackboxSelector>(v_);
  }

 private:
  std::variant<Polytope, std::vector<Polytope>, BlackboxSelector> v_;
};

/// Parses an RFC-4180 CSV with a mandatory header row; the named response
/// column becomes y and every other column, in header order, becomes a column
/// of X. All cells must be numeric ("." decimal separator); errors name the
/// offending row and column.
RegressionData load_csv(const std::string& path, const std::string& response);

/// Centers y; centers and scales each X column to sample standard deviation 1
/// (unit l2 norm per sqrt(n)). Idempotent. Errors on a constant column,
/// naming it.
RegressionData standardize(const RegressionData& data);

}  // namespace selinf
