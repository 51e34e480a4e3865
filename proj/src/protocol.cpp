#include "ekert/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ekert/eavesdrop.hpp"

namespace ekert {

void SessionConfig::validate() const {
    if (duration_s.has_value() == n_trials.has_value())
        throw std::invalid_argument("exactly one of duration_s / n_trials must be set");
    if (duration_s && *duration_s <= 0.0)
        throw std::invalid_argument("duration_s must be positive");
    if (n_trials && *n_trials == 0)
        throw std::invalid_argument("n_trials must be positive");
    if (visibility < 0.0 || visibility > 1.0)
        throw std::invalid_argument("visibility must lie in [0,1]");
    source.validate();
}

int pick_setting(Xoshiro256& rng) {
    return 1 + static_cast<int>(rng() % 4);
}

SettingClass classify(int alice_index, int bob_index) {
    if (alice_index < 1 || alice_index > 4 || bob_index < 1 || bob_index > 4)
        throw std::invalid_argument("setting indices must be 1..4");
    using enum SettingClass;
    static constexpr SettingClass table[4][4] = {
        // bob:     1        2        3        4
        {bell_s, discard, bell_s, key},           // alice 1
        {discard, bell_s_prime, key, bell_s_prime},  // alice 2
        {bell_s, key, bell_s, discard},           // alice 3
        {key, bell_s_prime, discard, bell_s_prime},  // alice 4
    };
    return table[alice_index - 1][bob_index - 1];
}

int outcome_to_bit(Party party, int setting_index, DetPort outcome) {
    if (setting_index < 1 || setting_index > 4)
        throw std::invalid_argument("setting index must be 1..4");
    int bit_direct;
    if (party == Party::alice)
        bit_direct = (setting_index == 1 || setting_index == 3) ? 0 : 1;
    else
        bit_direct = (setting_index == 2 || setting_index == 4) ? 1 : 0;
    return outcome == DetPort::direct ? bit_direct : 1 - bit_direct;
}

namespace {

// Per-session precomputation: the channel branches an intercepted pair can
// take, with their coincidence probabilities at all 16 settings. Sampling a
// trial then costs a few uniforms instead of matrix algebra.
struct SessionTables {
    AttackMode mode = AttackMode::none;
    double fraction = 0.0;
    double p_chi = 0.0;      // dephase: probability the chi projector fires
    double pass_prob = 0.0;  // filter: survival probability of the pair

    std::array<std::array<CoincidenceProbs, 4>, 4> clean;
    std::array<std::array<CoincidenceProbs, 4>, 4> chi;       // dephase outcome 0 / filter pass
    std::array<std::array<CoincidenceProbs, 4>, 4> chi_perp;  // dephase outcome 1

    static std::array<std::array<CoincidenceProbs, 4>, 4> tabulate(const JointState& state,
                                                                   double asymmetry) {
        std::array<std::array<CoincidenceProbs, 4>, 4> out;
        for (int a = 1; a <= 4; ++a)
            for (int b = 1; b <= 4; ++b)
                out[a - 1][b - 1] = apply_detector_asymmetry(
                    coincidence_probs(state, kAliceAngles[a - 1], kBobAngles[b - 1]),
                    asymmetry);
        return out;
    }
};

SessionTables build_tables(const SessionConfig& config, const AttackSpec& attack) {
    SessionTables t;
    const double asym = config.source.detector_asymmetry;
    const JointState base = visibility_mix(phi_plus(), config.visibility);
    t.clean = SessionTables::tabulate(base, asym);
    if (!attack.active()) return t;

    t.mode = attack.mode;
    t.fraction = attack.fraction;
    const PureQubit chi = poincare_state(attack.basis);
    if (attack.mode == AttackMode::dephase) {
        auto [state_chi, p_chi] = filter_channel(base, chi);
        auto [state_perp, p_perp] = filter_channel(base, chi.orthogonal());
        (void)p_perp;
        t.p_chi = p_chi;
        t.chi = SessionTables::tabulate(state_chi, asym);
        t.chi_perp = SessionTables::tabulate(state_perp, asym);
    } else {
        auto [filtered, pass] = filter_channel(base, chi);
        t.pass_prob = pass;
        t.chi = SessionTables::tabulate(filtered, asym);
    }
    return t;
}

struct SessionStreams {
    SeedStream alice;
    SeedStream bob;
    SeedStream source;
    SeedStream eve;

    explicit SessionStreams(std::uint64_t seed)
        : alice(seed, "alice-settings"),
          bob(seed, "bob-settings"),
          source(seed, "source"),
          eve(seed, "eve") {}
};

std::optional<TrialRecord> simulate_one_window(std::uint64_t w, const SessionConfig& config,
                                               const AttackSpec& attack,
                                               const SessionTables& tables,
                                               const SessionStreams& streams) {
    Xoshiro256 alice_rng = streams.alice.at(w);
    Xoshiro256 bob_rng = streams.bob.at(w);
    Xoshiro256 src_rng = streams.source.at(w);
    Xoshiro256 eve_rng = streams.eve.at(w);

    const int a_idx = pick_setting(alice_rng);
    const int b_idx = pick_setting(bob_rng);

    // LC voltage read out mid-transition: the setting is ambiguous and the
    // window is dropped.
    if (uniform01(src_rng) < config.source.ambiguous_setting_prob) return std::nullopt;

    // Eve's move on this pair, mirroring intercept().
    const std::array<std::array<CoincidenceProbs, 4>, 4>* probs = &tables.clean;
    std::optional<int> eve_outcome;
    if (tables.mode != AttackMode::none && uniform01(eve_rng) < tables.fraction) {
        if (tables.mode == AttackMode::dephase) {
            const int outcome = uniform01(eve_rng) < tables.p_chi ? 0 : 1;
            eve_outcome = outcome;
            probs = outcome == 0 ? &tables.chi : &tables.chi_perp;
        } else {
            if (uniform01(eve_rng) >= tables.pass_prob) return std::nullopt;  // pair destroyed
            eve_outcome = 0;
            probs = &tables.chi;
        }
    }

    const auto& params = config.source;
    std::poisson_distribution<int> pair_count(params.coincidence_rate * params.window);
    const int n_pairs = pair_count(src_rng);
    std::poisson_distribution<int> bg_count(params.background_rate() * params.window);
    const int n_background = bg_count(src_rng);
    if (n_pairs == 0 && n_background == 0) return std::nullopt;

    TrialRecord rec;
    rec.window = w;
    rec.alice_index = static_cast<std::uint8_t>(a_idx);
    rec.bob_index = static_cast<std::uint8_t>(b_idx);
    rec.cls = classify(a_idx, b_idx);

    const bool background_first =
        uniform01(src_rng) * (n_pairs + n_background) < static_cast<double>(n_background);
    if (background_first) {
        rec.background = true;
        rec.alice_out = uniform01(src_rng) < 0.5 ? DetPort::direct : DetPort::prime;
        rec.bob_out = uniform01(src_rng) < 0.5 ? DetPort::direct : DetPort::prime;
    } else {
        auto [alice_out, bob_out] = sample_outcome((*probs)[a_idx - 1][b_idx - 1], src_rng);
        rec.alice_out = alice_out;
        rec.bob_out = bob_out;
        rec.double_pair = uniform01(src_rng) < params.double_pair_key_frac;
        if (eve_outcome)
            rec.eve_guess = static_cast<std::int8_t>(eve_guess_bit(attack, *eve_outcome, b_idx));
    }

    if (rec.cls == SettingClass::key) {
        rec.alice_bit = static_cast<std::int8_t>(outcome_to_bit(Party::alice, a_idx, rec.alice_out));
        rec.bob_bit = static_cast<std::int8_t>(outcome_to_bit(Party::bob, b_idx, rec.bob_out));
    }
    return rec;
}

// Analytic chance that a window yields a usable trial; guards the
// trial-count mode against configurations that can never produce one.
double record_probability(const SessionConfig& config, const SessionTables& tables) {
    const auto& p = config.source;
    const double lambda = (p.coincidence_rate + p.background_rate()) * p.window;
    double prob = (1.0 - std::exp(-lambda)) * (1.0 - p.ambiguous_setting_prob);
    if (tables.mode == AttackMode::filter)
        prob *= 1.0 - tables.fraction * (1.0 - tables.pass_prob);
    return prob;
}

template <bool Parallel>
void fill_slots(std::vector<std::optional<TrialRecord>>& slots, std::uint64_t first_window,
                const SessionConfig& config, const AttackSpec& attack,
                const SessionTables& tables, const SessionStreams& streams) {
    const std::int64_t n = static_cast<std::int64_t>(slots.size());
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i)
            slots[i] = simulate_one_window(first_window + i, config, attack, tables, streams);
    } else {
        for (std::int64_t i = 0; i < n; ++i)
            slots[i] = simulate_one_window(first_window + i, config, attack, tables, streams);
    }
}

template <bool Parallel>
SessionData run_session_impl(const SessionConfig& config, const AttackSpec& attack) {
    config.validate();
    attack.validate();

    const SessionTables tables = build_tables(config, attack);
    const SessionStreams streams(config.seed);

    SessionData data;
    data.config = config;
    data.attack = attack;

    if (config.duration_s) {
        const auto n_windows =
            static_cast<std::uint64_t>(*config.duration_s / config.source.cycle_period);
        std::vector<std::optional<TrialRecord>> slots(n_windows);
        fill_slots<Parallel>(slots, 0, config, attack, tables, streams);
        data.trials.reserve(static_cast<std::size_t>(n_windows * 0.9));
        for (auto& slot : slots)
            if (slot) data.trials.push_back(*slot);
        data.windows_run = n_windows;
        return data;
    }

    const std::uint64_t wanted = *config.n_trials;
    const double p_record = record_probability(config, tables);
    if (p_record < 1e-9)
        throw std::invalid_argument("configuration can never produce a usable trial");

    data.trials.reserve(wanted);
    std::uint64_t next_window = 0;
    while (data.trials.size() < wanted) {
        const std::uint64_t missing = wanted - data.trials.size();
        const auto batch =
            static_cast<std::uint64_t>(std::ceil(missing / p_record * 1.05)) + 64;
        std::vector<std::optional<TrialRecord>> slots(batch);
        fill_slots<Parallel>(slots, next_window, config, attack, tables, streams);
        for (auto& slot : slots) {
            if (slot && data.trials.size() < wanted) {
                data.trials.push_back(*slot);
                data.windows_run = slot->window + 1;
            }
        }
        next_window += batch;
    }
    return data;
}

}  // namespace

SessionData run_session(const SessionConfig& config, const AttackSpec& attack) {
    return run_session_impl<true>(config, attack);
}

SessionData run_session_serial(const SessionConfig& config, const AttackSpec& attack) {
    return run_session_impl<false>(config, attack);
}

SiftResult sift(const SessionData& data) {
    SiftResult out;
    for (const TrialRecord& t : data.trials) {
        switch (t.cls) {
            case SettingClass::key:
                out.alice_key.push_back(static_cast<std::uint8_t>(t.alice_bit));
                out.bob_key.push_back(static_cast<std::uint8_t>(t.bob_bit));
                break;
            case SettingClass::bell_s:
                out.bell_s_trials.push_back(t);
                break;
            case SettingClass::bell_s_prime:
                out.bell_s_prime_trials.push_back(t);
                break;
            case SettingClass::discard:
                ++out.n_discarded;
                break;
        }
    }
    return out;
}

void write_session_log(std::ostream& out, const SessionData& data) {
    const auto& s = data.config.source;
    out.precision(17);
    out << "# ekertsim session log v1\n";
    out << "# seed=" << data.config.seed << " visibility=" << data.config.visibility
        << " windows=" << data.windows_run << "\n";
    out << "# attack: mode=" << to_string(data.attack.mode)
        << " plane=" << to_string(data.attack.basis.plane)
        << " angle=" << data.attack.basis.angle_deg << " fraction=" << data.attack.fraction
        << "\n";
    out << "# source: coincidence_rate=" << s.coincidence_rate << " window=" << s.window
        << " cycle_period=" << s.cycle_period << " gate=" << s.gate
        << " dead_time=" << s.dead_time << " detector_efficiency=" << s.detector_efficiency
        << " dark_rate=" << s.dark_rate << " accidental_rate=" << s.accidental_rate
        << " ambiguous_setting_prob=" << s.ambiguous_setting_prob
        << " double_pair_key_frac=" << s.double_pair_key_frac << "\n";
    out << "# columns: window alice_index bob_index alice_out bob_out class"
           " alice_bit bob_bit double_pair background eve_guess\n";
    for (const TrialRecord& t : data.trials) {
        out << t.window << ' ' << int(t.alice_index) << ' ' << int(t.bob_index) << ' '
            << int(t.alice_out == DetPort::prime) << ' ' << int(t.bob_out == DetPort::prime)
            << ' ' << static_cast<char>(t.cls) << ' ' << int(t.alice_bit) << ' '
            << int(t.bob_bit) << ' ' << int(t.double_pair) << ' ' << int(t.background) << ' '
            << int(t.eve_guess) << '\n';
    }
}

namespace {

double header_value(const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos)
        throw std::runtime_error("session log header is missing " + key);
    return std::stod(line.substr(pos + key.size() + 1));
}

}  // namespace

SessionData read_session_log(std::istream& in) {
    SessionData data;
    std::string line;
    bool seen_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("seed=") != std::string::npos) {
                data.config.seed = static_cast<std::uint64_t>(header_value(line, "seed"));
                data.config.visibility = header_value(line, "visibility");
                data.windows_run = static_cast<std::uint64_t>(header_value(line, "windows"));
                seen_header = true;
            } else if (line.find("# source:") == 0) {
                auto& s = data.config.source;
                s.coincidence_rate = header_value(line, "coincidence_rate");
                s.window = header_value(line, "window");
                s.cycle_period = header_value(line, "cycle_period");
                s.gate = header_value(line, "gate");
                s.dead_time = header_value(line, "dead_time");
                s.detector_efficiency = header_value(line, "detector_efficiency");
                s.dark_rate = header_value(line, "dark_rate");
                s.accidental_rate = header_value(line, "accidental_rate");
                s.ambiguous_setting_prob = header_value(line, "ambiguous_setting_prob");
                s.double_pair_key_frac = header_value(line, "double_pair_key_frac");
            } else if (line.find("# attack:") == 0) {
                auto& a = data.attack;
                if (line.find("mode=filter") != std::string::npos) a.mode = AttackMode::filter;
                else if (line.find("mode=dephase") != std::string::npos) a.mode = AttackMode::dephase;
                if (line.find("plane=B") != std::string::npos) a.basis.plane = Plane::B;
                else if (line.find("plane=C") != std::string::npos) a.basis.plane = Plane::C;
                a.basis.angle_deg = header_value(line, "angle");
                a.fraction = header_value(line, "fraction");
            }
            continue;
        }
        std::istringstream fields(line);
        TrialRecord t;
        std::uint64_t window;
        int a_idx, b_idx, a_out, b_out, a_bit, b_bit, dp, bg, eve;
        char cls;
        if (!(fields >> window >> a_idx >> b_idx >> a_out >> b_out >> cls >> a_bit >> b_bit >>
              dp >> bg >> eve))
            throw std::runtime_error("malformed session log line: " + line);
        t.window = window;
        t.alice_index = static_cast<std::uint8_t>(a_idx);
        t.bob_index = static_cast<std::uint8_t>(b_idx);
        t.alice_out = a_out ? DetPort::prime : DetPort::direct;
        t.bob_out = b_out ? DetPort::prime : DetPort::direct;
        t.cls = static_cast<SettingClass>(cls);
        if (classify(a_idx, b_idx) != t.cls)
            throw std::runtime_error("session log class disagrees with the setting table");
        t.alice_bit = static_cast<std::int8_t>(a_bit);
        t.bob_bit = static_cast<std::int8_t>(b_bit);
        t.double_pair = dp != 0;
        t.background = bg != 0;
        t.eve_guess = static_cast<std::int8_t>(eve);
        data.trials.push_back(t);
    }
    if (!seen_header) throw std::runtime_error("not a session log (missing header)");
    data.config.n_trials = data.trials.size();
    return data;
}

}  // namespace ekert
