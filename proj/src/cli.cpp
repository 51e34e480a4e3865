#include "ekert/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ekert {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write " + path.string());
    out << content;
}

std::string key_to_text(const Key& key) {
    std::string text(key.size(), '0');
    for (std::size_t i = 0; i < key.size(); ++i)
        if (key[i]) text[i] = '1';
    text.push_back('\n');
    return text;
}

}  // namespace

AnalysisResult analyze_session(const SessionData& data, const RunConfig& config) {
    SiftResult sifted = sift(data);
    if (sifted.alice_key.empty()) throw PipelineError("session produced no key bits");

    SessionReport report;
    report.n_raw = sifted.alice_key.size();
    report.duration_s = data.duration_seconds();
    report.raw_rate = report.duration_s > 0 ? report.n_raw / report.duration_s : 0.0;

    report.bell = estimate_bell(sifted.bell_s_trials, sifted.bell_s_prime_trials);
    report.ber_value = ber(sifted.alice_key, sifted.bob_key);

    // Conservative error estimate: observed rate plus three binomial sigma.
    const double n = static_cast<double>(report.n_raw);
    const double sigma_ber =
        std::sqrt(std::max(report.ber_value * (1.0 - report.ber_value), 1.0 / n) / n);
    report.ber_conservative = std::min(1.0, report.ber_value + 3.0 * sigma_ber);

    std::uint64_t double_pairs = 0;
    for (const TrialRecord& t : data.trials)
        if (t.cls == SettingClass::key && t.double_pair) ++double_pairs;
    report.double_pair_frac = static_cast<double>(double_pairs) / n;

    report.eve_bound_value = eve_bound(report.ber_conservative, report.double_pair_frac);
    report.eve_bits = static_cast<std::uint64_t>(std::ceil(report.eve_bound_value * n));

    std::vector<std::size_t> schedule;
    if (config.reconcile_initial_block > 0) {
        schedule.resize(static_cast<std::size_t>(config.reconcile_rounds));
        schedule[0] = config.reconcile_initial_block;
        for (std::size_t i = 1; i < schedule.size(); ++i) schedule[i] = schedule[i - 1] * 2;
    } else {
        schedule = default_block_schedule(std::max(report.ber_value, 1e-4),
                                          config.reconcile_rounds);
    }

    Xoshiro256 reconcile_rng(derive_seed(config.seed, "reconcile"));
    ReconcileResult reconciled;
    try {
        reconciled = reconcile(sifted.alice_key, sifted.bob_key, schedule, reconcile_rng,
                               config.reconcile_round_cap);
    } catch (const std::exception& e) {
        throw PipelineError(std::string("reconciliation failed: ") + e.what());
    }
    report.n_ec = reconciled.key.size();
    report.bits_disclosed = reconciled.bits_disclosed;

    std::uint64_t n_final = config.amplify_n_final;
    if (n_final == 0) {
        const std::int64_t target = static_cast<std::int64_t>(report.n_ec) -
                                    static_cast<std::int64_t>(report.eve_bits) -
                                    static_cast<std::int64_t>(config.amplify_security_bits);
        n_final = target > 0 ? static_cast<std::uint64_t>(target) : 0;
    }
    if (n_final > report.n_ec)
        throw PipelineError("amplify.n_final exceeds the reconciled key length");
    report.n_final = n_final;
    report.final_rate = report.duration_s > 0 ? n_final / report.duration_s : 0.0;

    const ResidualInfo residual =
        residual_info(static_cast<std::int64_t>(report.n_ec),
                      static_cast<std::int64_t>(report.n_final),
                      static_cast<std::int64_t>(report.eve_bits));
    report.residual_s = residual.s;
    report.residual_bound = residual.bound;

    const Throughput rates = throughput(data.config.source);
    const DetectionResult detection = detection_time(data, rates.usable_rate);
    report.detection_time_s = detection.seconds;
    report.detection_crossed = detection.detected;

    const double sqrt2 = std::sqrt(2.0);
    report.eavesdropper_flagged =
        !(std::abs(report.bell.S) - 2.0 * report.bell.S_sigma > sqrt2 &&
          std::abs(report.bell.S_prime) - 2.0 * report.bell.S_prime_sigma > sqrt2);

    AnalysisResult result;
    result.final_key =
        amplify(reconciled.key, report.n_final, derive_seed(config.seed, "hash"));
    result.report = report;
    result.alice_key = std::move(sifted.alice_key);
    result.bob_key = std::move(sifted.bob_key);
    return result;
}

namespace {

// Runs the session, the analysis, and writes all keygen artifacts.
void keygen_impl(const RunConfig& config, std::ostream& out) {
    SessionConfig session_cfg = config.session_config();
    try {
        session_cfg.validate();
        config.attack.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    const SessionData data = config.parallel
                                 ? run_session(session_cfg, config.attack)
                                 : run_session_serial(session_cfg, config.attack);
    const AnalysisResult analysis = analyze_session(data, config);
    const SessionReport& report = analysis.report;

    const fs::path dir(config.out_dir);
    fs::create_directories(dir);
    write_file(dir / "alice_key.txt", key_to_text(analysis.alice_key));
    write_file(dir / "bob_key.txt", key_to_text(analysis.bob_key));
    write_file(dir / "final_key.txt", key_to_text(analysis.final_key));

    std::ostringstream log_text;
    write_session_log(log_text, data);
    write_file(dir / "session.log", log_text.str());

    std::ostringstream report_text;
    report.write_kv(report_text);
    write_file(dir / "report.txt", report_text.str());

    std::ostringstream csv_text;
    report.write_csv_row(csv_text, true);
    write_file(dir / "report.csv", csv_text.str());

    out << "keygen: " << report.n_raw << " raw bits, BER " << report.ber_value << ", S "
        << report.bell.S << " +- " << report.bell.S_sigma << ", " << report.n_ec
        << " reconciled, " << report.n_final << " final bits\n";
    out << "artifacts written to " << dir.string() << "\n";
}

}  // namespace

int cmd_keygen(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        keygen_impl(config, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "pipeline error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_attack_sweep(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        const std::vector<double> angles = config.sweep_grid();
        if (angles.empty()) throw ConfigError("attack-sweep needs a nonempty angle grid");

        SweepParams params;
        params.mode = config.sweep_mode;
        params.fraction = config.sweep_fraction;
        params.trials_per_point = config.sweep_trials;
        params.seed = config.seed;
        params.visibility = config.visibility;
        params.source = config.source;
        params.parallel = config.parallel;
        if (params.mode == AttackMode::none)
            throw ConfigError("attack-sweep needs sweep.mode filter or dephase");

        const std::vector<SweepRow> rows = sweep(config.sweep_plane, angles, params);

        const fs::path csv_path = config.csv_path.empty()
                                      ? fs::path(config.out_dir) / "sweep.csv"
                                      : fs::path(config.csv_path);
        if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
        std::ostringstream csv_text;
        write_sweep_csv(csv_text, rows);
        write_file(csv_path, csv_text.str());

        double sum_abs_s = 0.0;
        double sum_ber = 0.0;
        for (const SweepRow& r : rows) {
            sum_abs_s += std::abs(r.S_analytic);
            sum_ber += r.ber_analytic;
        }
        const double n = static_cast<double>(rows.size());
        const PlaneAverage uniform = plane_average(config.sweep_plane, params.mode, 360);
        out << "attack-sweep: " << rows.size() << " points on plane "
            << to_string(config.sweep_plane) << ", mode " << to_string(params.mode) << "\n";
        out << "swept-point average: |S| " << sum_abs_s / n << ", BER " << sum_ber / n << "\n";
        out << "uniform-grid average: |S| " << uniform.avg_abs_S << ", BER " << uniform.avg_ber
            << "\n";
        out << "table written to " << csv_path.string() << "\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "pipeline error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_theory(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        config.attack.validate();
        const Observables obs = predicted_observables(config.attack, config.visibility);
        out << "attack: mode=" << to_string(config.attack.mode)
            << " plane=" << to_string(config.attack.basis.plane)
            << " angle=" << config.attack.basis.angle_deg
            << " fraction=" << config.attack.fraction << " visibility=" << config.visibility
            << "\n";
        out << "S = " << obs.S << "\n";
        out << "S_prime = " << obs.S_prime << "\n";
        for (int b = 1; b <= 4; ++b)
            out << "ber_key_setting_b" << b << " = " << obs.ber_per_setting[b - 1] << "\n";
        out << "ber_avg = " << obs.ber_avg << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        const fs::path log_path = fs::path(config.out_dir) / "session.log";
        std::ifstream in(log_path);
        if (!in) throw ConfigError("cannot open session log: " + log_path.string());
        SessionData data;
        try {
            data = read_session_log(in);
        } catch (const std::exception& e) {
            throw PipelineError(e.what());
        }

        const SessionReport report = analyze_session(data, config).report;
        const fs::path dir(config.out_dir);
        std::ostringstream report_text;
        report.write_kv(report_text);
        write_file(dir / "report.txt", report_text.str());
        std::ostringstream csv_text;
        report.write_csv_row(csv_text, true);
        write_file(dir / "report.csv", csv_text.str());
        report.write_kv(out);
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "pipeline error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace ekert
