#include "ekert/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ekert {

SessionConfig RunConfig::session_config() const {
    SessionConfig cfg;
    cfg.seed = seed;
    cfg.duration_s = duration_s;
    cfg.n_trials = n_trials;
    cfg.visibility = visibility;
    cfg.source = source;
    return cfg;
}

std::vector<double> RunConfig::sweep_grid() const {
    if (!sweep_angles.empty()) return sweep_angles;
    std::vector<double> grid;
    const double period = plane_period_deg(sweep_plane);
    for (double a = 0.0; a < period - 1e-9; a += 15.0) grid.push_back(a);
    return grid;
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("config key " + key + ": trailing characters in '" + value + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    if (v < 0 || v != std::floor(v))
        throw ConfigError("config key " + key + ": expected a nonnegative integer");
    return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key " + key + ": expected true/false");
}

Plane parse_plane(const std::string& key, const std::string& value) {
    if (value == "A" || value == "a") return Plane::A;
    if (value == "B" || value == "b") return Plane::B;
    if (value == "C" || value == "c") return Plane::C;
    throw ConfigError("config key " + key + ": expected plane A, B or C");
}

AttackMode parse_mode(const std::string& key, const std::string& value) {
    if (value == "none") return AttackMode::none;
    if (value == "filter") return AttackMode::filter;
    if (value == "dephase") return AttackMode::dephase;
    throw ConfigError("config key " + key + ": expected none/filter/dephase");
}

// Angle lists come as "start:stop:step" (inclusive stop) or comma-separated
// values.
std::vector<double> parse_angles(const std::string& key, const std::string& value) {
    std::vector<double> out;
    if (value.find(':') != std::string::npos) {
        std::istringstream ss(value);
        std::string a, b, c;
        if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
            throw ConfigError("config key " + key + ": expected start:stop:step");
        const double start = parse_double(key, trim(a));
        const double stop = parse_double(key, trim(b));
        const double step = parse_double(key, trim(c));
        if (step <= 0 || stop < start)
            throw ConfigError("config key " + key + ": bad angle range");
        for (double x = start; x <= stop + 1e-9; x += step) out.push_back(x);
        return out;
    }
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(parse_double(key, t));
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty angle list");
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));

        if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "duration_s") cfg.duration_s = parse_double(key, value);
        else if (key == "n_trials") cfg.n_trials = parse_u64(key, value);
        else if (key == "visibility") cfg.visibility = parse_double(key, value);
        else if (key == "parallel") cfg.parallel = parse_bool(key, value);
        else if (key == "source.coincidence_rate") cfg.source.coincidence_rate = parse_double(key, value);
        else if (key == "source.window") cfg.source.window = parse_double(key, value);
        else if (key == "source.cycle_period") cfg.source.cycle_period = parse_double(key, value);
        else if (key == "source.gate") cfg.source.gate = parse_double(key, value);
        else if (key == "source.dead_time") cfg.source.dead_time = parse_double(key, value);
        else if (key == "source.detector_efficiency") cfg.source.detector_efficiency = parse_double(key, value);
        else if (key == "source.dark_rate") cfg.source.dark_rate = parse_double(key, value);
        else if (key == "source.accidental_rate") cfg.source.accidental_rate = parse_double(key, value);
        else if (key == "source.ambiguous_setting_prob") cfg.source.ambiguous_setting_prob = parse_double(key, value);
        else if (key == "source.double_pair_key_frac") cfg.source.double_pair_key_frac = parse_double(key, value);
        else if (key == "source.detector_asymmetry") cfg.source.detector_asymmetry = parse_double(key, value);
        else if (key == "attack.mode") cfg.attack.mode = parse_mode(key, value);
        else if (key == "attack.plane") cfg.attack.basis.plane = parse_plane(key, value);
        else if (key == "attack.angle") cfg.attack.basis.angle_deg = parse_double(key, value);
        else if (key == "attack.fraction") cfg.attack.fraction = parse_double(key, value);
        else if (key == "sweep.plane") cfg.sweep_plane = parse_plane(key, value);
        else if (key == "sweep.mode") cfg.sweep_mode = parse_mode(key, value);
        else if (key == "sweep.fraction") cfg.sweep_fraction = parse_double(key, value);
        else if (key == "sweep.angles") cfg.sweep_angles = parse_angles(key, value);
        else if (key == "sweep.trials") cfg.sweep_trials = parse_u64(key, value);
        else if (key == "reconcile.initial_block") cfg.reconcile_initial_block = parse_u64(key, value);
        else if (key == "reconcile.doubling_rounds") cfg.reconcile_rounds = static_cast<int>(parse_u64(key, value));
        else if (key == "reconcile.round_cap") cfg.reconcile_round_cap = static_cast<int>(parse_u64(key, value));
        else if (key == "amplify.n_final") cfg.amplify_n_final = parse_u64(key, value);
        else if (key == "amplify.security_bits") cfg.amplify_security_bits = parse_u64(key, value);
        else if (key == "out.dir") cfg.out_dir = value;
        else if (key == "out.csv") cfg.csv_path = value;
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace ekert
