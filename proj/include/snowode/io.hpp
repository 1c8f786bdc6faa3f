#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snowode/metrics.hpp"
#include "snowode/model.hpp"
#include "snowode/pipeline.hpp"
#include "snowode/simulation.hpp"
#include "snowode/training.hpp"

namespace snowode {

inline constexpr std::string_view snowode_version = "1.0.0";

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// version and artifact kind, first lines of every artifact.
Metadata artifact_metadata(std::string_view kind);
void append_hyperparams(Metadata &meta, const Hyperparams &hp);

/// Hyperparameter config keys: N, n, n1, n2, batch_size, epochs, learning_rate,
/// rmsprop_rho, rmsprop_epsilon, seed. Absent keys keep the value from `base`;
/// unknown keys are an error.
Hyperparams hyperparams_from_json_text(const std::string &text, Hyperparams base = {});
std::string hyperparams_to_json_text(const Hyperparams &hp);

/// {"base": {...}, "grid": {"N": [1, 2], "n1": [1, 2], ...}}: cartesian product
/// of the listed values over the base setting, in key order N, n, n1, n2,
/// batch_size, epochs, learning_rate, seed.
std::vector<Hyperparams> grid_from_json_text(const std::string &text);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

/// Little-endian IEEE-754 binary64, base64 encoded.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view text);

std::string model_to_json(const ConstrainedModel &model, const Metadata &meta = {});
ConstrainedModel model_from_json(const std::string &text);
void save_model(const std::string &path, const ConstrainedModel &model, const Metadata &meta = {});
ConstrainedModel load_model(const std::string &path);

/// Processed table columns, in order.
inline constexpr std::string_view processed_columns[] = {"site",  "date",   "z",      "swe",    "rh",
                                                         "solar", "wind",   "t_air",  "precip", "f_snow",
                                                         "p_snow", "p_rain", "dz_dt", "dswe_dt"};

void write_processed_csv(std::ostream &out, const std::vector<ProcessedRecord> &records, const Metadata &meta);
std::vector<ProcessedRecord> read_processed_csv(std::istream &in);
void write_processed_file(const std::string &path, const std::vector<ProcessedRecord> &records, const Metadata &meta);
std::vector<ProcessedRecord> read_processed_file(const std::string &path);

/// Plot-ready simulation output for one site.
struct SimulationTable
{
    std::string site;
    std::vector<std::int64_t> time;
    std::vector<std::optional<double>> z_obs, z_hat, swe_obs, swe_hat;
    std::vector<bool> reset;
};

SimulationTable simulation_table(const SimulationResult &result, const SiteSeries &series);
void write_simulation_csv(std::ostream &out, const SimulationTable &table, const Metadata &meta);
SimulationTable read_simulation_csv(std::istream &in);
void write_simulation_file(const std::string &path, const SimulationTable &table, const Metadata &meta);
SimulationTable read_simulation_file(const std::string &path);

struct MetricRow
{
    std::string site;
    std::string variable;
    std::string series;
    MetricReport report;
};

void write_metrics_csv(std::ostream &out, const std::vector<MetricRow> &rows, const Metadata &meta);
void write_ale_csv(std::ostream &out, const std::vector<AleCurve> &curves, const Metadata &meta);
void write_audit_csv(std::ostream &out, const AuditLog &audit, const Metadata &meta);

} // namespace snowode
