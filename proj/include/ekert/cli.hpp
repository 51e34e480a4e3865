#pragma once

#include <iosfwd>

#include "ekert/config.hpp"
#include "ekert/eavesdrop.hpp"
#include "ekert/postprocess.hpp"

namespace ekert {

// The classical postprocessing pipeline applied to a finished session:
// sift -> Bell estimate -> BER -> Eve bound -> reconcile -> amplify ->
// residual bound -> detection time. Throws PipelineError on failure.
struct AnalysisResult {
    SessionReport report;
    Key alice_key;  // sifted raw keys
    Key bob_key;
    Key final_key;  // reconciled and amplified
};

AnalysisResult analyze_session(const SessionData& data, const RunConfig& config);

// Command entry points. They validate, run, write their artifacts under
// config.out_dir, print a short summary to `out`, and return a process exit
// code: 0 success, 1 configuration error, 2 pipeline error.
int cmd_keygen(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_attack_sweep(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_theory(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace ekert
