#pragma once

#include "kpgp/precision.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kpgp::cli {

struct KernelSpec {
    int p = 1;
    std::optional<double> omega; ///< nullopt: estimate by maximum likelihood
};

struct NuggetSpec {
    bool estimate = false;
    double ratio = 0.0;
};

struct MeanSpec {
    enum class Kind { Profile, Value, None };
    Kind kind = Kind::Profile;
    double value = 0.0;
};

struct DesignSpec {
    enum class Kind { Raw, Grid, Sparse };
    Kind kind = Kind::Raw;
    std::string family;
    int level = 0;
};

enum class OutputFormat { Table, Records };

struct RunConfig {
    std::string command;
    std::string train;
    std::string test;
    std::string out;
    KernelSpec kernel;
    NuggetSpec nugget;
    MeanSpec mean;
    DesignSpec design;
    std::string manifest_in;
    std::string manifest_out;
    OutputFormat format = OutputFormat::Table;
    std::uint64_t seed = 1;
    Precision precision = Precision::Auto;
    bool oracle = false;
    std::size_t mesh_size = 201;
    std::vector<std::size_t> sizes;
    std::size_t test_points = 1000;
    std::size_t oracle_max = 2000;
};

KernelSpec parse_kernel_spec(std::string_view text);
NuggetSpec parse_nugget_spec(std::string_view text);
MeanSpec parse_mean_spec(std::string_view text);
DesignSpec parse_design_spec(std::string_view text);
OutputFormat parse_format(std::string_view text);
/// Comma-separated sizes; a:b expands to 2^a .. 2^b.
std::vector<std::size_t> parse_sizes(std::string_view text);

std::string to_string(const KernelSpec& k);
std::string to_string(const NuggetSpec& n);
std::string to_string(const MeanSpec& m);
std::string to_string(const DesignSpec& d);
std::string to_string(OutputFormat f);

/// Cross-field checks for the chosen command.
void validate(const RunConfig& config);

/// Resolved configuration as ordered key/value pairs for echoing into outputs.
std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& config);

} // namespace kpgp::cli
