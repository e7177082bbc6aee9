#include "ecoinf/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/AutoDiff>

#include "ecoinf/glm.hpp"

namespace ecoinf {

namespace {

constexpr int kChunk = 8;
using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, kChunk, 1>>;

constexpr double kSigmaFloor = 1e-8;
constexpr double kBoundary = 1e-3;

double value_of(double x) { return x; }
double value_of(const Dual& x) { return x.value(); }

template <typename T>
T abs_of(const T& x) {
  return value_of(x) < 0.0 ? T(-x) : x;
}

// Newton iteration on a strictly concave function given value, slope and
// curvature; halves the step while the value does not improve.
template <typename F>
double concave_mode(const F& eval, double start) {
  double x = start;
  double f = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  eval(x, f, d1, d2);
  for (int it = 0; it < 100; ++it) {
    double step = -d1 / d2;
    if (!std::isfinite(step)) break;
    double xn = x + step;
    double fn = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    eval(xn, fn, g1, g2);
    int halvings = 0;
    while (!(fn >= f - 1e-12 * std::abs(f)) && halvings < 40) {
      step *= 0.5;
      xn = x + step;
      eval(xn, fn, g1, g2);
      ++halvings;
    }
    x = xn;
    f = fn;
    d1 = g1;
    d2 = g2;
    if (std::abs(step) < 1e-12 * (1.0 + std::abs(x))) break;
  }
  return x;
}

std::string group_label(const std::vector<std::string>& labels, Index g) {
  if (g >= 0 && g < static_cast<Index>(labels.size())) return labels[static_cast<std::size_t>(g)];
  return "g" + std::to_string(g + 1);
}

}  // namespace

RawEstimate raw_estimates(std::span<const IndividualTable> tables) {
  if (tables.empty()) throw ValidationError("raw estimates need at least one table");
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(tables.front().counts.rows(), tables.front().counts.cols());
  for (const IndividualTable& t : tables) {
    if (t.counts.rows() != pooled.rows() || t.counts.cols() != pooled.cols()) {
      throw ValidationError("table '" + t.id + "' has different dimensions");
    }
    pooled += t.counts.cast<double>();
  }
  RawEstimate est;
  est.pi = pooled;
  for (Index i = 0; i < pooled.rows(); ++i) {
    const double total = pooled.row(i).sum();
    if (total > 0.0) {
      est.pi.row(i) /= total;
    } else {
      est.pi.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      est.undefined_rows.push_back(i);
    }
  }
  return est;
}

TransitionMatrix RawEstimate::transition() const {
  if (!undefined_rows.empty()) {
    throw EstimationError("row " + std::to_string(undefined_rows.front() + 1) + " has no voters");
  }
  return TransitionMatrix(pi, 1e-9);
}

std::vector<CellObservation> cell_observations(std::span<const IndividualTable> tables, const DatasetMeta& meta,
                                               Index outcome_column) {
  if (outcome_column < 0 || outcome_column >= meta.cols()) throw ValidationError("outcome column out of range");
  std::vector<CellObservation> obs;
  for (const IndividualTable& t : tables) {
    if (t.counts.rows() != meta.rows() || t.counts.cols() != meta.cols()) {
      throw ValidationError("table '" + t.id + "' does not match dataset dimensions");
    }
    const auto seat = meta.seat_of_unit.find(t.id);
    if (seat == meta.seat_of_unit.end()) throw ValidationError("unit '" + t.id + "' has no seat");
    for (Index i = 0; i < t.counts.rows(); ++i) {
      const Count trials = t.counts.row(i).sum();
      if (trials == 0) continue;
      obs.push_back({t.id, seat->second, i, trials, t.counts(i, outcome_column)});
    }
  }
  return obs;
}

Index FixedEffectsDesign::group_position(Index group) const {
  const auto it = std::find(groups.begin(), groups.end(), group);
  return it == groups.end() ? -1 : static_cast<Index>(it - groups.begin());
}

Eigen::VectorXd FixedEffectsDesign::row(Index group, const Eigen::VectorXd& z) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(size());
  const Index pos = group_position(group);
  if (pos < 0) throw ValidationError("group " + std::to_string(group + 1) + " is not in the model");
  if (intercepts == Intercepts::per_group) {
    r(pos) = 1.0;
  } else {
    r(0) = 1.0;
    if (pos > 0) r(pos) = 1.0;
  }
  r.tail(size() - num_groups()) = z;
  return r;
}

std::vector<std::string> FixedEffectsDesign::coefficient_names() const {
  std::vector<std::string> names;
  for (Index k = 0; k < num_groups(); ++k) {
    const std::string label = group_label(group_labels, groups[static_cast<std::size_t>(k)]);
    if (intercepts == Intercepts::baseline_contrast && k > 0) {
      names.push_back(label + " - " + group_label(group_labels, groups.front()));
    } else {
      names.push_back(label);
    }
  }
  names.insert(names.end(), covariate_names.begin(), covariate_names.end());
  return names;
}

template <typename T>
struct MultilevelLikelihood::StationTerms {
  T loglik;
  T d1;  // d loglik / d offset
  T d2;  // d2 loglik / d offset2
};

MultilevelLikelihood::MultilevelLikelihood(std::span<const CellObservation> obs, Eigen::MatrixXd design,
                                           std::vector<Index> re_class, int levels, int quadrature_nodes)
    : design_(std::move(design)), levels_(levels) {
  const Index n = static_cast<Index>(obs.size());
  if (n == 0) throw ValidationError("no observations");
  if (design_.rows() != n || static_cast<Index>(re_class.size()) != n) {
    throw ValidationError("design and class vectors must have one entry per observation");
  }
  if (levels != 2 && levels != 3) throw ValidationError("levels must be 2 or 3");
  set_quadrature_nodes(quadrature_nodes);
  trials_.resize(n);
  successes_.resize(n);
  num_classes_ = 1 + *std::max_element(re_class.begin(), re_class.end());
  std::map<std::pair<std::string, Index>, Index> station_index;
  std::map<std::pair<std::string, Index>, Index> seat_index;
  for (Index k = 0; k < n; ++k) {
    const CellObservation& o = obs[static_cast<std::size_t>(k)];
    if (o.successes < 0 || o.successes > o.trials) {
      throw ValidationError("unit '" + o.unit_id + "': successes outside [0, trials]");
    }
    trials_(k) = static_cast<double>(o.trials);
    successes_(k) = static_cast<double>(o.successes);
    constant_ += log_binomial_coefficient(trials_(k), successes_(k));
    const Index cls = re_class[static_cast<std::size_t>(k)];
    const auto [st, new_station] = station_index.try_emplace({o.unit_id, cls}, static_cast<Index>(stations_.size()));
    if (new_station) {
      stations_.push_back({{}, cls});
      const auto [se, new_seat] = seat_index.try_emplace({o.seat_id, cls}, static_cast<Index>(seats_.size()));
      if (new_seat) seats_.push_back({{}, cls});
      seats_[static_cast<std::size_t>(se->second)].stations.push_back(st->second);
    }
    stations_[static_cast<std::size_t>(st->second)].obs.push_back(k);
  }
  station_modes_.assign(stations_.size(), 0.0);
  seat_modes_.assign(seats_.size(), 0.0);
}

void MultilevelLikelihood::set_quadrature_nodes(int nodes) { rule_ = gauss_hermite(nodes); }

template <typename T>
MultilevelLikelihood::StationTerms<T> MultilevelLikelihood::station_terms(Index station, const VectorX<T>& eta,
                                                                          const T& offset, const T& sigma) const {
  using std::exp;
  using std::log;
  using std::sqrt;
  const Station& st = stations_[static_cast<std::size_t>(station)];

  // log-likelihood of the station's cells, its slope and curvature in the shared shift
  const auto cells = [&](const T& shift, T& s, T& info) {
    T ll(0.0);
    s = T(0.0);
    info = T(0.0);
    for (const Index k : st.obs) {
      const T e = eta(k) + shift;
      const T p = inverse_logit(e);
      ll += binomial_loglik(trials_(k), successes_(k), e);
      s += successes_(k) - trials_(k) * p;
      info += trials_(k) * p * (1.0 - p);
    }
    return ll;
  };

  StationTerms<T> out;
  if (value_of(sigma) < kSigmaFloor) {
    T s;
    T info;
    out.loglik = cells(offset, s, info);
    out.d1 = s;
    out.d2 = -info;
    return out;
  }

  const double sd = value_of(sigma);
  const double off = value_of(offset);
  Eigen::VectorXd eta_d(static_cast<Index>(st.obs.size()));
  for (std::size_t m = 0; m < st.obs.size(); ++m) eta_d(static_cast<Index>(m)) = value_of(eta(st.obs[m]));
  double& cached = station_modes_[static_cast<std::size_t>(station)];
  cached = concave_mode(
      [&](double b, double& f, double& g1, double& g2) {
        f = -0.5 * b * b / (sd * sd);
        g1 = -b / (sd * sd);
        g2 = -1.0 / (sd * sd);
        for (std::size_t m = 0; m < st.obs.size(); ++m) {
          const Index k = st.obs[m];
          const double e = eta_d(static_cast<Index>(m)) + off + b;
          const double p = inverse_logit(e);
          f += binomial_loglik(trials_(k), successes_(k), e);
          g1 += successes_(k) - trials_(k) * p;
          g2 -= trials_(k) * p * (1.0 - p);
        }
      },
      cached);

  // one Newton step in T carries the mode's dependence on the parameters
  const T var = sigma * sigma;
  T s;
  T info;
  cells(offset + cached, s, info);
  const T mode = cached + (s - cached / var) / (info + 1.0 / var);
  cells(offset + mode, s, info);
  const T scale = 1.0 / sqrt(info + 1.0 / var);

  const Index nodes = rule_.nodes.size();
  std::vector<T> terms(static_cast<std::size_t>(nodes));
  std::vector<T> score(static_cast<std::size_t>(nodes));
  std::vector<T> curvature(static_cast<std::size_t>(nodes));
  double top = -std::numeric_limits<double>::infinity();
  for (Index m = 0; m < nodes; ++m) {
    const double x = rule_.nodes(m);
    const T b = mode + std::numbers::sqrt2 * scale * x;
    T sm;
    T im;
    const T ll = cells(offset + b, sm, im);
    const auto idx = static_cast<std::size_t>(m);
    terms[idx] = rule_.log_weights(m) + x * x + ll - 0.5 * b * b / var;
    score[idx] = sm;
    curvature[idx] = im;
    top = std::max(top, value_of(terms[idx]));
  }
  T total(0.0);
  for (const T& t : terms) total += exp(t - top);
  const T lse = top + log(total);
  out.loglik = log(scale) - log(abs_of(sigma)) - 0.5 * std::log(std::numbers::pi) + lse;
  out.d1 = T(0.0);
  T mean_info(0.0);
  T second(0.0);
  for (std::size_t m = 0; m < terms.size(); ++m) {
    const T w = exp(terms[m] - lse);
    out.d1 += w * score[m];
    second += w * score[m] * score[m];
    mean_info += w * curvature[m];
  }
  out.d2 = second - out.d1 * out.d1 - mean_info;
  return out;
}

template <typename T>
T MultilevelLikelihood::seat_loglik(const Seat& seat, const VectorX<T>& eta, const T& sigma_station,
                                    const T& sigma_seat) const {
  using std::log;
  const auto sum_stations = [&](const T& a, T& d1, T& d2) {
    T ll(0.0);
    d1 = T(0.0);
    d2 = T(0.0);
    for (const Index s : seat.stations) {
      const StationTerms<T> st = station_terms<T>(s, eta, a, sigma_station);
      ll += st.loglik;
      d1 += st.d1;
      d2 += st.d2;
    }
    return ll;
  };
  T d1;
  T d2;
  if (levels_ == 2 || value_of(sigma_seat) < kSigmaFloor) return sum_stations(T(0.0), d1, d2);

  const double sd = value_of(sigma_seat);
  const std::size_t seat_pos = static_cast<std::size_t>(&seat - seats_.data());
  double& cached = seat_modes_[seat_pos];
  if constexpr (std::is_same_v<T, double>) {
    cached = concave_mode(
        [&](double a, double& f, double& g1, double& g2) {
          f = sum_stations(a, g1, g2) - 0.5 * a * a / (sd * sd);
          g1 -= a / (sd * sd);
          g2 -= 1.0 / (sd * sd);
        },
        cached);
  } else {
    const VectorX<double> eta_d = eta.unaryExpr([](const T& e) { return value_of(e); });
    seat_loglik<double>(seat, eta_d, value_of(sigma_station), sd);
  }

  const T var = sigma_seat * sigma_seat;
  sum_stations(T(cached), d1, d2);
  const T mode = cached - (d1 - cached / var) / (d2 - 1.0 / var);
  const T ll = sum_stations(mode, d1, d2);
  const T curvature = d2 - 1.0 / var;
  return ll - 0.5 * mode * mode / var - log(abs_of(sigma_seat)) - 0.5 * log(-curvature);
}

template <typename T>
T MultilevelLikelihood::evaluate(const VectorX<T>& theta) const {
  const Index p = num_fixed();
  const Index K = num_classes_;
  const VectorX<T> beta = theta.head(p);
  VectorX<T> eta(design_.rows());
  for (Index k = 0; k < design_.rows(); ++k) {
    T e(0.0);
    for (Index c = 0; c < p; ++c) {
      if (design_(k, c) != 0.0) e += design_(k, c) * beta(c);
    }
    eta(k) = e;
  }
  T total(constant_);
  for (const Seat& seat : seats_) {
    const T sst = abs_of(T(theta(p + seat.cls)));
    const T sse = levels_ == 3 ? abs_of(T(theta(p + K + seat.cls))) : T(0.0);
    total += seat_loglik<T>(seat, eta, sst, sse);
  }
  return total;
}

double MultilevelLikelihood::value(const Eigen::VectorXd& theta) const {
  if (theta.size() != num_params()) throw ValidationError("parameter vector has the wrong length");
  return evaluate<double>(theta);
}

double MultilevelLikelihood::value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const {
  if (theta.size() != num_params()) throw ValidationError("parameter vector has the wrong length");
  const Index P = num_params();
  gradient.resize(P);
  double value = 0.0;
  for (Index start = 0; start < P; start += kChunk) {
    VectorX<Dual> th(P);
    for (Index k = 0; k < P; ++k) {
      th(k).value() = theta(k);
      th(k).derivatives().setZero();
      if (k >= start && k < start + kChunk) th(k).derivatives()(k - start) = 1.0;
    }
    const Dual ll = evaluate<Dual>(th);
    value = ll.value();
    const Index width = std::min<Index>(kChunk, P - start);
    gradient.segment(start, width) = ll.derivatives().head(width);
  }
  return value;
}

namespace {

struct Standardized {
  Eigen::MatrixXd z;  // observations x q, standardized
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

Standardized standardized_covariates(std::span<const CellObservation> obs, const CovariateTable& covariates) {
  const Index q = covariates.size();
  Standardized out;
  out.z.resize(static_cast<Index>(obs.size()), q);
  out.mean = Eigen::VectorXd::Zero(q);
  out.sd = Eigen::VectorXd::Ones(q);
  if (q == 0) return out;
  std::vector<std::string> ids;
  ids.reserve(obs.size());
  for (const CellObservation& o : obs) ids.push_back(o.unit_id);
  out.z = covariates.aligned(ids);
  // moments over the units, not the cells
  const Eigen::MatrixXd per_unit = covariates.values;
  out.mean = per_unit.colwise().mean().transpose();
  for (Index l = 0; l < q; ++l) {
    const double sd = std::sqrt((per_unit.col(l).array() - out.mean(l)).square().sum() /
                                std::max<double>(1.0, static_cast<double>(per_unit.rows() - 1)));
    if (!(sd > 1e-12)) {
      throw EstimationError("covariate '" + covariates.names[static_cast<std::size_t>(l)] + "' is constant");
    }
    out.sd(l) = sd;
  }
  out.z = (out.z.rowwise() - out.mean.transpose()).array().rowwise() / out.sd.transpose().array();
  return out;
}

MLFit fit_with_design(std::span<const CellObservation> obs, const CovariateTable& covariates,
                      const FixedEffectsDesign& design, const MultilevelStructure& structure) {
  const Index n = static_cast<Index>(obs.size());
  const Index G = design.num_groups();
  const Index q = covariates.size();
  const Standardized cov = standardized_covariates(obs, covariates);

  Eigen::MatrixXd X(n, design.size());
  std::vector<Index> re_class(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd trials(n);
  Eigen::VectorXd successes(n);
  for (Index k = 0; k < n; ++k) {
    const CellObservation& o = obs[static_cast<std::size_t>(k)];
    X.row(k) = design.row(o.group, cov.z.row(k).transpose()).transpose();
    if (structure.per_group_sigmas) re_class[static_cast<std::size_t>(k)] = design.group_position(o.group);
    trials(k) = static_cast<double>(o.trials);
    successes(k) = static_cast<double>(o.successes);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) throw EstimationError("fixed-effect design is rank deficient");

  const MultilevelLikelihood likelihood(obs, X, re_class, structure.levels, structure.quadrature_nodes);
  const LogisticFit start = fit_binomial_logistic(X, trials, successes);
  Eigen::VectorXd theta0 = Eigen::VectorXd::Constant(likelihood.num_params(), 0.1);
  theta0.head(X.cols()) = start.beta;

  const Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    if (grad == nullptr) return -likelihood.value(theta);
    const double v = likelihood.value_and_gradient(theta, *grad);
    *grad = -*grad;
    return -v;
  };
  const MinimizeResult res = minimize_bfgs(objective, theta0, structure.minimize);

  const Index p = X.cols();
  const Index K = likelihood.num_classes();
  MLFit fit;
  fit.design = design;
  fit.coef_names = design.coefficient_names();
  fit.loglik = -res.value;
  for (const double v : res.trace) fit.loglik_trace.push_back(-v);
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.levels = structure.levels;
  fit.quadrature_nodes = structure.quadrature_nodes;
  fit.sigma_station = res.x.segment(p, K).cwiseAbs();
  if (structure.levels == 3) fit.sigma_seat = res.x.segment(p + K, K).cwiseAbs();
  fit.sigma_station_at_boundary = fit.sigma_station.minCoeff() < kBoundary;
  fit.sigma_seat_at_boundary = fit.sigma_seat.size() > 0 && fit.sigma_seat.minCoeff() < kBoundary;

  // back to the original covariate scale: beta = T beta_std
  Eigen::MatrixXd back = Eigen::MatrixXd::Identity(p, p);
  for (Index l = 0; l < q; ++l) {
    back(G + l, G + l) = 1.0 / cov.sd(l);
    const Index base_columns = design.intercepts == FixedEffectsDesign::Intercepts::per_group ? G : 1;
    for (Index c = 0; c < base_columns; ++c) back(c, G + l) = -cov.mean(l) / cov.sd(l);
  }
  fit.beta = back * res.x.head(p);
  fit.beta_se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  if (structure.compute_se) {
    const Index P = likelihood.num_params();
    Eigen::MatrixXd hessian(P, P);
    Eigen::VectorXd gp;
    Eigen::VectorXd gm;
    for (Index k = 0; k < P; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(res.x(k)));
      Eigen::VectorXd xp = res.x;
      Eigen::VectorXd xm = res.x;
      xp(k) += h;
      xm(k) -= h;
      likelihood.value_and_gradient(xp, gp);
      likelihood.value_and_gradient(xm, gm);
      hessian.col(k) = (gp - gm) / (2.0 * h);
    }
    const Eigen::MatrixXd info = -0.5 * (hessian + hessian.transpose());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Eigen::MatrixXd cov_all = ldlt.solve(Eigen::MatrixXd::Identity(P, P));
      const Eigen::MatrixXd cov_beta = back * cov_all.topLeftCorner(p, p) * back.transpose();
      fit.beta_se = cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
  }
  fit.p_values.resize(p);
  fit.significance.clear();
  for (Index c = 0; c < p; ++c) {
    fit.p_values(c) = std::isfinite(fit.beta_se(c)) && fit.beta_se(c) > 0.0
                          ? normal_two_sided_p(fit.beta(c) / fit.beta_se(c))
                          : std::numeric_limits<double>::quiet_NaN();
    fit.significance.push_back(std::isnan(fit.p_values(c)) ? "" : significance_code(fit.p_values(c)));
  }
  return fit;
}

}  // namespace

MLFit fit_multilevel(std::span<const CellObservation> obs, const CovariateTable& covariates,
                     const MultilevelStructure& structure) {
  if (obs.empty()) throw ValidationError("no observations");
  FixedEffectsDesign design;
  design.intercepts = FixedEffectsDesign::Intercepts::per_group;
  for (const CellObservation& o : obs) design.groups.push_back(o.group);
  std::sort(design.groups.begin(), design.groups.end());
  design.groups.erase(std::unique(design.groups.begin(), design.groups.end()), design.groups.end());
  design.group_labels = structure.group_labels;
  design.covariate_names = covariates.names;
  return fit_with_design(obs, covariates, design, structure);
}

MLFit fit_per_group(std::span<const CellObservation> obs, const CovariateTable& covariates,
                    std::span<const Index> groups, const MultilevelStructure& structure) {
  if (groups.empty()) throw ValidationError("no groups selected");
  std::vector<CellObservation> subset;
  for (const Index g : groups) {
    const auto before = subset.size();
    std::copy_if(obs.begin(), obs.end(), std::back_inserter(subset),
                 [g](const CellObservation& o) { return o.group == g; });
    if (subset.size() == before) throw ValidationError("group " + std::to_string(g + 1) + " has no observations");
  }
  FixedEffectsDesign design;
  design.intercepts = FixedEffectsDesign::Intercepts::baseline_contrast;
  design.groups.assign(groups.begin(), groups.end());
  design.group_labels = structure.group_labels;
  design.covariate_names = covariates.names;
  return fit_with_design(subset, covariates, design, structure);
}

namespace {

Eigen::MatrixXd unit_probabilities(const MLFit& fit, std::span<const UnitAggregate> units,
                                   const CovariateTable& covariates) {
  const Index G = fit.design.num_groups();
  const Index q = static_cast<Index>(fit.design.covariate_names.size());
  Eigen::MatrixXd z(static_cast<Index>(units.size()), q);
  if (q > 0) z = covariates.select(fit.design.covariate_names).aligned(units);
  Eigen::MatrixXd p(static_cast<Index>(units.size()), G);
  for (Index u = 0; u < p.rows(); ++u) {
    for (Index k = 0; k < G; ++k) {
      const Eigen::VectorXd row = fit.design.row(fit.design.groups[static_cast<std::size_t>(k)], z.row(u).transpose());
      p(u, k) = inverse_logit(row.dot(fit.beta));
    }
  }
  return p;
}

}  // namespace

TransitionMatrix averaged_probabilities(const MLFit& fit, std::span<const UnitAggregate> units,
                                        const CovariateTable& covariates, Averaging averaging) {
  if (units.empty()) throw ValidationError("no units to average over");
  const Eigen::MatrixXd p = unit_probabilities(fit, units, covariates);
  const Index G = fit.design.num_groups();
  Eigen::MatrixXd out(G, 2);
  for (Index k = 0; k < G; ++k) {
    const Index g = fit.design.groups[static_cast<std::size_t>(k)];
    double num = 0.0;
    double den = 0.0;
    if (averaging == Averaging::voters) {
      for (Index u = 0; u < p.rows(); ++u) {
        const auto& x = units[static_cast<std::size_t>(u)].x;
        const double w = g < x.size() ? static_cast<double>(x(g)) : 0.0;
        num += w * p(u, k);
        den += w;
      }
    }
    if (!(den > 0.0)) {
      num = p.col(k).sum();
      den = static_cast<double>(p.rows());
    }
    out(k, 1) = num / den;
    out(k, 0) = 1.0 - out(k, 1);
  }
  return TransitionMatrix(out);
}

Eigen::MatrixXd ml_predict_cells(const MLFit& fit, std::span<const UnitAggregate> units,
                                 const CovariateTable& covariates) {
  Eigen::MatrixXd p = unit_probabilities(fit, units, covariates);
  for (Index u = 0; u < p.rows(); ++u) {
    const auto& x = units[static_cast<std::size_t>(u)].x;
    for (Index k = 0; k < p.cols(); ++k) {
      const Index g = fit.design.groups[static_cast<std::size_t>(k)];
      p(u, k) *= static_cast<double>(x(g));
    }
  }
  return p;
}

}  // namespace ecoinf
