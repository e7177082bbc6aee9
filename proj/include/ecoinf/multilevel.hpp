#pragma once

#include "ecoinf/optimize.hpp"
#include "ecoinf/quadrature.hpp"

namespace ecoinf {

/// Binomial cell of one row category ("group") in one polling station.
struct CellObservation {
  std::string unit_id;
  std::string seat_id;
  Index group = 0;
  Count trials = 0;
  Count successes = 0;
};

/// Pooled proportions sum_u n_uij / sum_u x_ui. Rows with no voters are NaN
/// and listed in `undefined_rows`.
struct RawEstimate {
  Eigen::MatrixXd pi;
  std::vector<Index> undefined_rows;

  /// Throws EstimationError when a row is undefined.
  TransitionMatrix transition() const;
};

RawEstimate raw_estimates(std::span<const IndividualTable> tables);

/// One observation per (unit, row) with successes = count in `outcome_column`.
std::vector<CellObservation> cell_observations(std::span<const IndividualTable> tables, const DatasetMeta& meta,
                                               Index outcome_column);

struct MultilevelStructure {
  int levels = 3;                 // 2: stations only, 3: stations within seats
  bool per_group_sigmas = false;  // separate random intercepts per group
  int quadrature_nodes = 9;       // adaptive Gauss-Hermite nodes for the station integral
  std::vector<std::string> group_labels;
  MinimizeOptions minimize{300, 1e-12, 1e-5};
  bool compute_se = true;
};

/// Fixed-effect layout. `per_group`: one intercept per group. `baseline_contrast`:
/// an intercept for groups[0] plus a contrast for every other group.
struct FixedEffectsDesign {
  enum class Intercepts { per_group, baseline_contrast };
  Intercepts intercepts = Intercepts::per_group;
  std::vector<Index> groups;
  std::vector<std::string> group_labels;
  std::vector<std::string> covariate_names;

  Index num_groups() const { return static_cast<Index>(groups.size()); }
  Index size() const { return num_groups() + static_cast<Index>(covariate_names.size()); }
  /// Position of `group` in `groups`, or -1.
  Index group_position(Index group) const;
  /// Design row for a cell of `group` with covariates z (on the scale the coefficients use).
  Eigen::VectorXd row(Index group, const Eigen::VectorXd& z) const;
  std::vector<std::string> coefficient_names() const;
};

struct MLFit {
  FixedEffectsDesign design;
  std::vector<std::string> coef_names;
  Eigen::VectorXd beta;     // original covariate scale
  Eigen::VectorXd beta_se;
  Eigen::VectorXd p_values;
  std::vector<std::string> significance;
  Eigen::VectorXd sigma_station;  // one entry, or one per group
  Eigen::VectorXd sigma_seat;     // empty for two-level models
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // after each accepted optimizer step
  bool converged = false;
  int iterations = 0;
  int levels = 3;
  int quadrature_nodes = 9;
  bool sigma_station_at_boundary = false;
  bool sigma_seat_at_boundary = false;
};

/// Marginal log-likelihood of a nested random-intercept logistic model.
///
/// Parameters are [beta; sigma_station (K); sigma_seat (K, three levels only)],
/// where K is 1 or the number of random-effect classes. Station effects are
/// integrated by adaptive Gauss-Hermite quadrature, seat effects by a Laplace
/// approximation around the seat mode. The likelihood depends on sigma only
/// through sigma^2, so signs are free during optimization.
class MultilevelLikelihood {
 public:
  /// `design` has one row per observation; `re_class` maps each observation to
  /// its random-effect class (all zeros for shared effects).
  MultilevelLikelihood(std::span<const CellObservation> obs, Eigen::MatrixXd design, std::vector<Index> re_class,
                       int levels, int quadrature_nodes);

  Index num_fixed() const { return design_.cols(); }
  Index num_classes() const { return num_classes_; }
  Index num_params() const { return num_fixed() + num_classes_ * (levels_ == 3 ? 2 : 1); }
  int levels() const { return levels_; }
  void set_quadrature_nodes(int nodes);

  double value(const Eigen::VectorXd& theta) const;
  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;

 private:
  struct Station {
    std::vector<Index> obs;
    Index cls = 0;
  };
  struct Seat {
    std::vector<Index> stations;
    Index cls = 0;
  };

  template <typename T>
  T evaluate(const VectorX<T>& theta) const;
  template <typename T>
  T seat_loglik(const Seat& seat, const VectorX<T>& eta, const T& sigma_station, const T& sigma_seat) const;
  template <typename T>
  struct StationTerms;
  template <typename T>
  StationTerms<T> station_terms(Index station, const VectorX<T>& eta, const T& offset, const T& sigma) const;

  Eigen::MatrixXd design_;
  Eigen::VectorXd trials_;
  Eigen::VectorXd successes_;
  double constant_ = 0.0;
  int levels_;
  Index num_classes_ = 1;
  std::vector<Station> stations_;
  std::vector<Seat> seats_;
  GaussHermite rule_;
  mutable std::vector<double> station_modes_;
  mutable std::vector<double> seat_modes_;
};

/// Group intercepts plus common covariate slopes, random intercepts for
/// stations (and seats).
MLFit fit_multilevel(std::span<const CellObservation> obs, const CovariateTable& covariates,
                     const MultilevelStructure& structure = {});

/// Model restricted to the observations of `groups`: an intercept for groups[0]
/// and contrasts for the others (e.g. F intercept and M-F for one age class).
MLFit fit_per_group(std::span<const CellObservation> obs, const CovariateTable& covariates,
                    std::span<const Index> groups, const MultilevelStructure& structure = {});

enum class Averaging { voters, units };

/// Per-group probabilities at zero random effects, averaged over units.
/// Rows follow fit.design.groups; columns are (other, outcome).
TransitionMatrix averaged_probabilities(const MLFit& fit, std::span<const UnitAggregate> units,
                                        const CovariateTable& covariates, Averaging averaging = Averaging::voters);

/// Expected successes x_ug * p_ug at zero random effects, N x groups (fit.design order).
Eigen::MatrixXd ml_predict_cells(const MLFit& fit, std::span<const UnitAggregate> units,
                                 const CovariateTable& covariates);

}  // namespace ecoinf
