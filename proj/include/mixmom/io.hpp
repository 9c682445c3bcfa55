#pragma once

#include "mixmom/estimator.hpp"
#include "mixmom/simbench.hpp"
#include "mixmom/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mixmom {

using Json = nlohmann::json;

/// Malformed configuration; maps to the usage/config exit code.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Json to_json(const Parameters& theta);
/// Accepts {"omega": [...], "b": [...], "beta": [[row 1], ..., [row d]]}.
Parameters parameters_from_json(const Json& j);

Json to_json(const EstimateReport& report, Link link);
Json to_json(const DirectionEstimate& dir);
Json to_json(const ReplicationResult& rep);

/// Config file schema:
///   name: string, link: "logit" | "probit", d: int, K: int,
///   omega: [K], b: [K], beta: d rows of K numbers,
///   n_grid: [int], replications: int, seed: int, trim_fraction: number.
/// Only the shape and parameter fields are required. Throws ConfigError.
ExperimentConfig config_from_json(const Json& j);
Json to_json(const ExperimentConfig& cfg);
ExperimentConfig read_config(const std::filesystem::path& path);

/// CSV with header x1,...,xd,y.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
/// Throws IoError on unreadable or malformed files.
Dataset read_dataset(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Published summed errors for the built-in experiments, keyed by link,
/// experiment id and n; absent when the combination was not reported.
struct ReferenceRow {
    double p = 0.0;
    double b = 0.0;
    std::vector<double> beta;
};
std::optional<ReferenceRow> reference_row(Link link, int experiment, int n);
const Json& reference_tables();

std::string table_csv(const ErrorTable& table, int experiment = 0);
std::string table_markdown(const ErrorTable& table, int experiment = 0);

std::string sha256_file(const std::filesystem::path& path);

/// Writes dir/manifest.json describing one command invocation. Paths are
/// stored relative to dir when they live inside it.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const Json& arguments,
                    std::uint64_t seed, const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

/// Files whose hash no longer matches the manifest (missing files included).
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

std::string version_string();

}  // namespace mixmom
