#pragma once

#include <filesystem>
#include <iosfwd>

#include "ecoinf/synth.hpp"
#include "json.hpp"

namespace ecoinf {

/// Aggregated CSV: `unit,seat,x_<row>...,y_<col>...`, one line per unit.
void write_aggregated_csv(std::ostream& out, std::span<const UnitAggregate> units, const DatasetMeta& meta);

struct AggregatedData {
  DatasetMeta meta;
  std::vector<UnitAggregate> units;
};

/// Throws ValidationError("line N: ...") on malformed input.
AggregatedData read_aggregated_csv(std::istream& in);

/// Individual CSV: `unit,row,col,count` with 1-based row and column indices.
void write_individual_csv(std::ostream& out, std::span<const IndividualTable> tables);
std::vector<IndividualTable> read_individual_csv(std::istream& in, Index rows, Index cols);

/// Covariate CSV: `unit,<name>...`; values are written with 17 significant digits.
void write_covariates_csv(std::ostream& out, const CovariateTable& table);
CovariateTable read_covariates_csv(std::istream& in);

nlohmann::json config_to_json(const GeneratorConfig& config);
GeneratorConfig config_from_json(const nlohmann::json& j);

nlohmann::json truth_to_json(const GeneratorTruth& truth, const DatasetMeta& meta);

/// Writes aggregated.csv, individual.csv, covariates.csv (when present) and truth.json into `dir`.
void write_population(const std::filesystem::path& dir, const SyntheticPopulation& pop);

/// Reads the files written by write_population; individual.csv and covariates.csv are optional.
struct Dataset {
  DatasetMeta meta;
  std::vector<UnitAggregate> units;
  std::vector<IndividualTable> tables;
  CovariateTable covariates;
};
Dataset read_dataset(const std::filesystem::path& aggregated, const std::filesystem::path& individual = {},
                     const std::filesystem::path& covariates = {});

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace ecoinf
