#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "rdforest/dgp.hpp"
#include "rdforest/domain.hpp"
#include "rdforest/mc.hpp"
#include "rdforest/rd.hpp"
#include "rdforest/score_transform.hpp"

// JSON documents for rules, DGPs, methods and study files. Unknown keys are
// rejected with ParseError.
//
// rule:   {"type": "threshold", "cutoff": c}
//         {"type": "half_plane", "normal": [..], "offset": b}
//         {"type": "curve", "vertices": [[x1, x2], ..], "treated_side": "below" | "above"}
// dgp:    "lee" or {"preset": "lee", <overrides>} or a full
//         {"name", "score_law", "cef", "outcome", "rule"} object.
// method: "rf" | "llf" | "llr" or {"method": "rf", <overrides>}.
// study:  {"dgp", "boundary_point", "methods", "sample_sizes", "replications", "seed", "level"}.

namespace rdforest {

AssignmentRule parse_rule_json(std::string_view text);
DGPSpec parse_dgp_json(std::string_view text);
MethodEntry parse_method_json(std::string_view text);
MCConfig parse_study_json(std::string_view text);
MCConfig parse_study_file(const std::string& path);

std::string read_text_file(const std::string& path);

std::string rule_to_json(const AssignmentRule& rule);
std::string dgp_to_json(const DGPSpec& spec);

struct EstimateOutput {
  EstimateReport report;
  std::string method;
  ScorePoint at{0.0};
  double buffer_epsilon = 0.0;  // effective shift; 0 for llr
  bool buffer_floored = false;
  double bandwidth = 0.0;       // llr only
};

std::string estimate_to_json(const EstimateOutput& output);
std::string diagnostic_to_json(const DensityDiagnostic& diagnostic);

inline constexpr const char* kVersion = "0.1.0";

/// Default parameters of every method and diagnostic as compact JSON.
std::string default_parameters_json();

/// 64-bit hash of default_parameters_json(), hex encoded.
std::string default_parameters_fingerprint();

}  // namespace rdforest
