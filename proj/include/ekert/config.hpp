#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ekert/attack.hpp"
#include "ekert/protocol.hpp"

namespace ekert {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full description of one invocation, read from a flat key=value file with
// dotted section prefixes (e.g. source.coincidence_rate=5000). The documented
// schema lives in the README.
struct RunConfig {
    std::uint64_t seed = 12345;
    std::optional<double> duration_s;
    std::optional<std::uint64_t> n_trials;
    double visibility = 1.0;
    bool parallel = true;

    SourceParams source{};
    AttackSpec attack{};

    // attack-sweep
    Plane sweep_plane = Plane::A;
    AttackMode sweep_mode = AttackMode::dephase;
    double sweep_fraction = 1.0;
    std::vector<double> sweep_angles;  // empty = 15-degree grid over the plane period
    std::uint64_t sweep_trials = 20000;

    // reconciliation / amplification
    std::size_t reconcile_initial_block = 0;  // 0 = ceil(0.73/measured ber)
    int reconcile_rounds = 4;
    int reconcile_round_cap = 64;
    std::uint64_t amplify_n_final = 0;  // 0 = n_ec - eve_bits - security_bits
    std::uint64_t amplify_security_bits = 2737;

    std::string out_dir = ".";
    std::string csv_path;  // attack-sweep table; empty = <out_dir>/sweep.csv

    SessionConfig session_config() const;
    std::vector<double> sweep_grid() const;
};

// Parses a config file; throws ConfigError on unknown keys or malformed
// values.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

}  // namespace ekert
