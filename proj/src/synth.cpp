#include "ecoinf/synth.hpp"

#include <cmath>
#include <random>

#include "ecoinf/link.hpp"

namespace ecoinf {

namespace {

using Engine = std::mt19937_64;

constexpr std::uint64_t kUnitStream = 0x756e6974;
constexpr std::uint64_t kSeatStream = 0x73656174;

Engine stream(std::uint64_t seed, std::uint64_t tag, Index index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index)};
  return Engine(seq);
}

Eigen::VectorXd dirichlet(Engine& rng, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd g(alpha.size());
  for (Index i = 0; i < alpha.size(); ++i) g(i) = std::gamma_distribution<double>(alpha(i), 1.0)(rng);
  return g / g.sum();
}

double beta_draw(Engine& rng, double mean, double sd) {
  const double common = mean * (1.0 - mean) / (sd * sd) - 1.0;
  const double a = std::gamma_distribution<double>(mean * common, 1.0)(rng);
  const double b = std::gamma_distribution<double>((1.0 - mean) * common, 1.0)(rng);
  return a / (a + b);
}

CountVector multinomial(Engine& rng, Count n, const Eigen::VectorXd& p) {
  CountVector out = CountVector::Zero(p.size());
  Count left = n;
  double mass = 1.0;
  for (Index j = 0; j + 1 < p.size() && left > 0; ++j) {
    const double q = mass > 0.0 ? std::clamp(p(j) / mass, 0.0, 1.0) : 0.0;
    out(j) = std::binomial_distribution<Count>(left, q)(rng);
    left -= out(j);
    mass -= p(j);
  }
  out(p.size() - 1) += left;
  return out;
}

std::string seat_name(Index s) { return "s" + std::to_string(s + 1); }

std::string unit_name(Index u, Index total) {
  std::string digits = std::to_string(u + 1);
  const std::size_t width = std::to_string(total).size();
  return "u" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

void validate_config(const GeneratorConfig& c) {
  const Index R = c.rows();
  const Index C = c.cols();
  if (R < 1 || C < 2) throw ValidationError("generator needs at least one row and two columns");
  if (c.num_units < 1 || c.num_seats < 1 || c.num_seats > c.num_units) {
    throw ValidationError("need 1 <= seats <= units");
  }
  if (static_cast<Index>(c.row_labels.size()) != R || static_cast<Index>(c.col_labels.size()) != C) {
    throw ValidationError("label counts do not match base_pi");
  }
  if ((c.base_pi.array() <= 0.0).any() || (c.base_pi.array() >= 1.0).any()) {
    throw ValidationError("base_pi entries must lie in (0, 1)");
  }
  if (((c.base_pi.rowwise().sum().array() - 1.0).abs() > 1e-9).any()) {
    throw ValidationError("base_pi rows must sum to 1");
  }
  if (c.concentration.size() != R || (c.concentration.array() <= 0.0).any()) {
    throw ValidationError("concentration must have R positive entries");
  }
  if (!(c.size_mean >= 1.0) || !(c.size_sd >= 0.0)) throw ValidationError("invalid unit-size law");
  if (!c.bias.empty()) {
    if (static_cast<Index>(c.bias.size()) != R) throw ValidationError("bias needs one matrix per row share");
    for (const Eigen::MatrixXd& b : c.bias) {
      if (b.rows() != R || b.cols() != C - 1) throw ValidationError("bias matrices must be R x (C-1)");
    }
  }
  for (const CovariateLaw& law : c.covariates) {
    if (!(law.mean > 0.0 && law.mean < 1.0) || !(law.sd > 0.0) || law.sd * law.sd >= law.mean * (1.0 - law.mean)) {
      throw ValidationError("covariate '" + law.name + "': Beta law needs 0 < mean < 1 and sd^2 < mean(1-mean)");
    }
    if (law.slopes.rows() != R || law.slopes.cols() != C - 1) {
      throw ValidationError("covariate '" + law.name + "': slopes must be R x (C-1)");
    }
  }
  if (!(c.sigma_station >= 0.0) || !(c.sigma_seat >= 0.0)) throw ValidationError("sigmas must be nonnegative");
}

SyntheticPopulation generate(const GeneratorConfig& config) {
  validate_config(config);
  const Index N = config.num_units;
  const Index S = config.num_seats;
  const Index R = config.rows();
  const Index C = config.cols();
  const Index q = static_cast<Index>(config.covariates.size());
  const Eigen::VectorXd tbar = config.concentration / config.concentration.sum();

  Eigen::MatrixXd base_logits(R, C - 1);
  for (Index i = 0; i < R; ++i) {
    for (Index j = 0; j + 1 < C; ++j) base_logits(i, j) = std::log(config.base_pi(i, j) / config.base_pi(i, C - 1));
  }

  // seat effects: one per seat, or one per seat and row
  const Index effects = config.per_group_effects ? R : 1;
  Eigen::MatrixXd seat_effect(S, effects);
  for (Index s = 0; s < S; ++s) {
    Engine rng = stream(config.seed, kSeatStream, s);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index k = 0; k < effects; ++k) seat_effect(s, k) = config.sigma_seat * normal(rng);
  }

  SyntheticPopulation pop;
  pop.meta.row_labels = config.row_labels;
  pop.meta.col_labels = config.col_labels;
  pop.covariates.names.reserve(static_cast<std::size_t>(q));
  for (const CovariateLaw& law : config.covariates) pop.covariates.names.push_back(law.name);
  pop.covariates.values.resize(N, q);
  pop.truth.base_pi = config.base_pi;
  pop.truth.bias = config.bias;
  pop.truth.sigma_station = config.sigma_station;
  pop.truth.sigma_seat = config.sigma_seat;
  Eigen::MatrixXd pooled_num = Eigen::MatrixXd::Zero(R, C);
  Eigen::VectorXd pooled_den = Eigen::VectorXd::Zero(R);

  for (Index u = 0; u < N; ++u) {
    Engine rng = stream(config.seed, kUnitStream, u);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index seat = u * S / N;
    const std::string id = unit_name(u, N);

    const Eigen::VectorXd shares = dirichlet(rng, config.concentration);
    const Count n = std::max<Count>(1, std::llround(config.size_mean + config.size_sd * normal(rng)));
    const CountVector x = multinomial(rng, n, shares);
    Eigen::VectorXd z(q);
    for (Index l = 0; l < q; ++l) {
      const CovariateLaw& law = config.covariates[static_cast<std::size_t>(l)];
      z(l) = beta_draw(rng, law.mean, law.sd);
    }
    Eigen::VectorXd station_effect(effects);
    for (Index k = 0; k < effects; ++k) station_effect(k) = config.sigma_station * normal(rng);

    const Eigen::VectorXd t = x.cast<double>() / static_cast<double>(n);
    Eigen::MatrixXd logits = base_logits;
    for (Index k = 0; k < static_cast<Index>(config.bias.size()); ++k) {
      logits += config.bias[static_cast<std::size_t>(k)] * (t(k) - tbar(k));
    }
    for (Index l = 0; l < q; ++l) {
      const CovariateLaw& law = config.covariates[static_cast<std::size_t>(l)];
      logits += law.slopes * (z(l) - law.mean);
    }
    Eigen::MatrixXd pi(R, C);
    IndividualTable table{id, CountMatrix(R, C)};
    for (Index i = 0; i < R; ++i) {
      const Index k = config.per_group_effects ? i : 0;
      const Eigen::VectorXd eta = logits.row(i).transpose().array() + seat_effect(seat, k) + station_effect(k);
      pi.row(i) = softmax_with_reference<double>(eta).transpose();
      table.counts.row(i) = multinomial(rng, x(i), pi.row(i).transpose()).transpose();
      pooled_num.row(i) += static_cast<double>(x(i)) * pi.row(i);
      pooled_den(i) += static_cast<double>(x(i));
    }

    pop.meta.seat_of_unit[id] = seat_name(seat);
    pop.units.push_back(aggregate(table));
    pop.tables.push_back(std::move(table));
    pop.truth.unit_pi.push_back(std::move(pi));
    pop.covariates.unit_ids.push_back(id);
    pop.covariates.values.row(u) = z.transpose();
  }
  pop.truth.expected_pooled = pooled_num;
  for (Index i = 0; i < R; ++i) {
    if (pooled_den(i) > 0.0) {
      pop.truth.expected_pooled.row(i) /= pooled_den(i);
    } else {
      pop.truth.expected_pooled.row(i) = config.base_pi.row(i);
    }
  }
  return pop;
}

SyntheticPopulation table1_fixture(int scale) {
  if (scale < 20 || scale % 20 != 0) {
    throw ValidationError("two-station fixture needs a positive multiple of 20, got " + std::to_string(scale));
  }
  const Count k = scale / 20;
  SyntheticPopulation pop;
  pop.meta.row_labels = {"F", "M"};
  pop.meta.col_labels = {"no", "yes"};
  CountMatrix first(2, 2);
  first << 5, 11, 1, 3;
  CountMatrix second(2, 2);
  second << 6, 2, 6, 6;
  pop.tables = {{"1", first * k}, {"2", second * k}};
  for (const IndividualTable& t : pop.tables) {
    pop.meta.seat_of_unit[t.id] = "1";
    pop.units.push_back(aggregate(t));
    Eigen::MatrixXd p = t.counts.cast<double>();
    for (Index i = 0; i < 2; ++i) p.row(i) /= p.row(i).sum();
    pop.truth.unit_pi.push_back(p);
  }
  const Eigen::MatrixXd pooled = (first + second).cast<double>();
  pop.truth.base_pi = pooled.array().colwise() / pooled.rowwise().sum().array();
  pop.truth.expected_pooled = pop.truth.base_pi;
  return pop;
}

GeneratorConfig palermo_like_config() {
  GeneratorConfig c;
  c.num_units = 593;
  c.num_seats = 31;
  const std::vector<std::string> ages{"18-25", "25-30", "30-45", "45-65", "65-75", "over 75"};
  for (const char* sex : {"M", "F"}) {
    for (const std::string& a : ages) c.row_labels.push_back(std::string(sex) + " " + a);
  }
  c.col_labels = {"no", "yes"};
  const Eigen::VectorXd yes = (Eigen::VectorXd(12) << 0.0442, 0.0448, 0.0478, 0.0688, 0.0654, 0.0345,  //
                               0.0435, 0.0467, 0.0445, 0.0647, 0.0427, 0.0156)
                                  .finished();
  c.base_pi.resize(12, 2);
  c.base_pi.col(0) = 1.0 - yes.array();
  c.base_pi.col(1) = yes;
  const Eigen::VectorXd eligible = (Eigen::VectorXd(12) << 32417, 22015, 70091, 89798, 29725, 21586,  //
                                    30490, 21109, 73397, 99564, 36201, 38012)
                                       .finished();
  c.concentration = 300.0 * eligible / eligible.sum();
  c.size_mean = 950.0;
  c.size_sd = 250.0;

  // Logits are log(no / yes): negative slopes raise turnout.
  c.bias.assign(12, Eigen::MatrixXd::Zero(12, 1));
  for (const Index k : {3, 4, 9, 10}) c.bias[static_cast<std::size_t>(k)].setConstant(-2.4);
  for (const Index k : {1, 2, 7, 8}) c.bias[static_cast<std::size_t>(k)].setConstant(1.5);
  c.covariates = {{"pd", 0.038, 0.015, Eigen::MatrixXd::Constant(12, 1, -11.0)},
                  {"idv", 0.051, 0.02, Eigen::MatrixXd::Constant(12, 1, -5.0)}};
  c.sigma_station = 0.2311;
  c.sigma_seat = 0.2547;
  c.seed = 1;
  return c;
}

GeneratorConfig no_bias_config(Index rows, Index cols, Index units, double size_mean, std::uint64_t seed) {
  GeneratorConfig c;
  c.num_units = units;
  c.num_seats = std::max<Index>(1, units / 20);
  for (Index i = 0; i < rows; ++i) c.row_labels.push_back("r" + std::to_string(i + 1));
  for (Index j = 0; j < cols; ++j) c.col_labels.push_back("c" + std::to_string(j + 1));
  c.base_pi.resize(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) c.base_pi(i, j) = 1.0 + static_cast<double>((i + 2 * j) % (cols + 1));
    c.base_pi.row(i) /= c.base_pi.row(i).sum();
  }
  c.concentration = Eigen::VectorXd::Constant(rows, 20.0 / static_cast<double>(rows));
  c.size_mean = size_mean;
  c.size_sd = 0.2 * size_mean;
  c.seed = seed;
  return c;
}

CovariateTable marginal_covariates(std::span<const UnitAggregate> units, std::span<const MarginalCovariate> specs) {
  CovariateTable table;
  table.values = Eigen::MatrixXd::Zero(static_cast<Index>(units.size()), static_cast<Index>(specs.size()));
  for (const MarginalCovariate& s : specs) table.names.push_back(s.name);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const UnitAggregate& unit = units[u];
    table.unit_ids.push_back(unit.id);
    for (std::size_t l = 0; l < specs.size(); ++l) {
      double share = 0.0;
      for (const Index i : specs[l].rows) {
        if (i < 0 || i >= unit.x.size()) throw ValidationError("covariate '" + specs[l].name + "': row out of range");
        share += unit.n > 0 ? static_cast<double>(unit.x(i)) / static_cast<double>(unit.n) : 0.0;
      }
      table.values(static_cast<Index>(u), static_cast<Index>(l)) = share;
    }
  }
  return table;
}

CovariateTable join_covariates(const CovariateTable& a, const CovariateTable& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  CovariateTable out;
  out.names = a.names;
  out.names.insert(out.names.end(), b.names.begin(), b.names.end());
  out.unit_ids = a.unit_ids;
  out.values.resize(a.values.rows(), a.size() + b.size());
  out.values.leftCols(a.size()) = a.values;
  out.values.rightCols(b.size()) = b.aligned(a.unit_ids);
  return out;
}

}  // namespace ecoinf
