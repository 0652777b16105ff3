#include "rdforest/config_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

#include "rdforest/error.hpp"
#include "rdforest/local_linear.hpp"

namespace rdforest {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

json parse_text(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!obj.is_object()) throw ParseError(std::string(what) + " must be a JSON object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ParseError("unknown key '" + item.key() + "' in " + std::string(what));
    }
  }
}

template <class T>
T get_as(const json& j, std::string_view what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ParseError("bad value for " + std::string(what));
  }
}

const json& require(const json& obj, const char* key, std::string_view what) {
  if (!obj.contains(key)) throw ParseError(std::string(what) + " is missing '" + key + "'");
  return obj.at(key);
}

std::size_t get_count(const json& j, std::string_view what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ParseError(std::string(what) + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

AssignmentRule rule_from(const json& j) {
  if (!j.is_object()) throw ParseError("rule must be a JSON object");
  const auto type = get_as<std::string>(require(j, "type", "rule"), "rule.type");
  if (type == "threshold") {
    check_keys(j, {"type", "cutoff"}, "threshold rule");
    return AssignmentRule::threshold(get_as<double>(require(j, "cutoff", "rule"), "cutoff"));
  }
  if (type == "half_plane") {
    check_keys(j, {"type", "normal", "offset"}, "half_plane rule");
    HalfPlane hp;
    hp.normal = get_as<std::vector<double>>(require(j, "normal", "rule"), "normal");
    hp.offset = get_as<double>(require(j, "offset", "rule"), "offset");
    return hp;
  }
  if (type == "curve") {
    check_keys(j, {"type", "vertices", "treated_side"}, "curve rule");
    CurveBoundary curve;
    for (const auto& v : require(j, "vertices", "rule")) {
      const auto xy = get_as<std::vector<double>>(v, "vertex");
      if (xy.size() != 2) throw ParseError("curve vertices are [x1, x2] pairs");
      curve.vertices.emplace_back(xy[0], xy[1]);
    }
    const auto side = j.contains("treated_side") ? get_as<std::string>(j.at("treated_side"), "treated_side")
                                                 : std::string("below");
    if (side == "below") curve.treated_side = TreatedSide::kBelow;
    else if (side == "above") curve.treated_side = TreatedSide::kAbove;
    else throw ParseError("treated_side must be 'below' or 'above'");
    return curve;
  }
  throw ParseError("unknown rule type '" + type + "'");
}

ojson rule_to(const AssignmentRule& rule) {
  ojson out;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, UnivariateThreshold>) {
          out["type"] = "threshold";
          out["cutoff"] = r.cutoff;
        } else if constexpr (std::is_same_v<T, HalfPlane>) {
          out["type"] = "half_plane";
          out["normal"] = r.normal;
          out["offset"] = r.offset;
        } else {
          out["type"] = "curve";
          ojson vs = ojson::array();
          for (const auto& [a, b] : r.vertices) vs.push_back({a, b});
          out["vertices"] = std::move(vs);
          out["treated_side"] = r.treated_side == TreatedSide::kBelow ? "below" : "above";
        }
      },
      rule.variant());
  return out;
}

ScoreLaw score_law_from_name(const std::string& s) {
  if (s == "beta_transform") return ScoreLaw::kBetaTransform;
  if (s == "uniform_square") return ScoreLaw::kUniformSquare;
  if (s == "gaussian_iid") return ScoreLaw::kGaussianIid;
  throw ParseError("unknown score law '" + s + "'");
}

const char* score_law_name(ScoreLaw law) {
  switch (law) {
    case ScoreLaw::kBetaTransform: return "beta_transform";
    case ScoreLaw::kUniformSquare: return "uniform_square";
    case ScoreLaw::kGaussianIid: return "gaussian_iid";
  }
  return "beta_transform";
}

const char* basis_name(CefBasis basis) {
  return basis == CefBasis::kRawPowers1d ? "raw_powers_1d" : "interacted_3rd_order_2d";
}

DGPSpec dgp_from(const json& j) {
  if (j.is_string()) return dgp_preset(j.get<std::string>());
  check_keys(j, {"preset", "name", "score_law", "cef", "outcome", "rule"}, "dgp");
  const bool preset = j.contains("preset");
  DGPSpec spec;
  if (preset) {
    spec = dgp_preset(get_as<std::string>(j.at("preset"), "preset"));
  } else {
    for (const char* key : {"score_law", "cef", "outcome", "rule"}) require(j, key, "dgp");
  }
  if (j.contains("name")) spec.name = get_as<std::string>(j.at("name"), "name");

  if (j.contains("score_law")) {
    const auto& s = j.at("score_law");
    check_keys(s, {"kind", "sigma"}, "score_law");
    if (s.contains("kind")) spec.score_law.kind = score_law_from_name(get_as<std::string>(s.at("kind"), "kind"));
    else if (!preset) throw ParseError("score_law is missing 'kind'");
    if (s.contains("sigma")) spec.score_law.sigma = get_as<double>(s.at("sigma"), "score_law.sigma");
  }
  if (j.contains("cef")) {
    const auto& c = j.at("cef");
    check_keys(c, {"degree", "basis", "treated", "control", "centers"}, "cef");
    if (!preset) {
      for (const char* key : {"basis", "treated", "control"}) require(c, key, "cef");
    }
    if (c.contains("basis")) {
      const auto b = get_as<std::string>(c.at("basis"), "basis");
      if (b == "raw_powers_1d") spec.cef.basis = CefBasis::kRawPowers1d;
      else if (b == "interacted_3rd_order_2d") spec.cef.basis = CefBasis::kInteracted3rdOrder2d;
      else throw ParseError("unknown CEF basis '" + b + "'");
    }
    if (c.contains("treated")) spec.cef.coeffs_treated = get_as<std::vector<double>>(c.at("treated"), "treated");
    if (c.contains("control")) spec.cef.coeffs_control = get_as<std::vector<double>>(c.at("control"), "control");
    if (c.contains("degree")) {
      spec.cef.degree = get_as<int>(c.at("degree"), "degree");
    } else if (spec.cef.basis == CefBasis::kRawPowers1d) {
      spec.cef.degree = static_cast<int>(spec.cef.coeffs_treated.size()) - 1;
    } else {
      spec.cef.degree = 3;
    }
    if (c.contains("centers")) spec.cef.centers = get_as<std::vector<double>>(c.at("centers"), "centers");
  }
  if (j.contains("outcome")) {
    const auto& o = j.at("outcome");
    check_keys(o, {"kind", "sigma"}, "outcome");
    if (o.contains("kind")) {
      const auto k = get_as<std::string>(o.at("kind"), "outcome.kind");
      if (k == "gaussian_noise") spec.outcome.kind = OutcomeKind::kGaussianNoise;
      else if (k == "bernoulli_logit") spec.outcome.kind = OutcomeKind::kBernoulliLogit;
      else throw ParseError("unknown outcome kind '" + k + "'");
    } else if (!preset) {
      throw ParseError("outcome is missing 'kind'");
    }
    if (o.contains("sigma")) spec.outcome.sigma = get_as<double>(o.at("sigma"), "outcome.sigma");
  }
  if (j.contains("rule")) spec.rule = rule_from(j.at("rule"));
  if (spec.name.empty()) spec.name = "custom";
  spec.validate();
  return spec;
}

MethodEntry method_from(const json& j) {
  if (j.is_string()) return MethodEntry::builtin(RDMethodConfig::defaults(parse_rd_method(j.get<std::string>())));
  check_keys(j,
             {"method", "name", "trees", "mtry", "min_node_size", "alpha", "honesty_fraction", "c_scale",
              "split_rule", "lambda", "standardize_penalty", "ci_group_size", "seed", "kernel", "bandwidth",
              "buffer_epsilon"},
             "method");
  RDMethodConfig cfg =
      RDMethodConfig::defaults(parse_rd_method(get_as<std::string>(require(j, "method", "method"), "method")));
  auto& f = cfg.forest;
  if (j.contains("trees")) f.num_trees = get_count(j.at("trees"), "trees");
  if (j.contains("mtry")) f.mtry = get_count(j.at("mtry"), "mtry");
  if (j.contains("min_node_size")) f.min_node_size = get_count(j.at("min_node_size"), "min_node_size");
  if (j.contains("alpha")) f.alpha = get_as<double>(j.at("alpha"), "alpha");
  if (j.contains("honesty_fraction")) f.honesty_fraction = get_as<double>(j.at("honesty_fraction"), "honesty_fraction");
  if (j.contains("c_scale")) f.c_scale = get_as<double>(j.at("c_scale"), "c_scale");
  if (j.contains("split_rule")) f.split_rule = parse_split_rule(get_as<std::string>(j.at("split_rule"), "split_rule"));
  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    if (l.is_string() && l.get<std::string>() == "auto") f.ridge_lambda.reset();
    else f.ridge_lambda = get_as<double>(l, "lambda");
  }
  if (j.contains("standardize_penalty")) {
    f.standardize_penalty = get_as<bool>(j.at("standardize_penalty"), "standardize_penalty");
  }
  if (j.contains("ci_group_size")) f.ci_group_size = get_count(j.at("ci_group_size"), "ci_group_size");
  if (j.contains("seed")) f.seed = get_as<std::uint64_t>(j.at("seed"), "seed");
  if (j.contains("kernel")) cfg.kernel.shape = parse_kernel_shape(get_as<std::string>(j.at("kernel"), "kernel"));
  if (j.contains("bandwidth")) cfg.kernel.bandwidth = get_as<double>(j.at("bandwidth"), "bandwidth");
  if (j.contains("buffer_epsilon")) cfg.buffer_epsilon = get_as<double>(j.at("buffer_epsilon"), "buffer_epsilon");
  cfg.validate();
  MethodEntry entry = MethodEntry::builtin(cfg);
  if (j.contains("name")) entry.name = get_as<std::string>(j.at("name"), "name");
  return entry;
}

}  // namespace

AssignmentRule parse_rule_json(std::string_view text) { return rule_from(parse_text(text, "rule")); }

DGPSpec parse_dgp_json(std::string_view text) {
  const json j = parse_text(text, "dgp");
  if (j.is_string()) return dgp_preset(j.get<std::string>());
  return dgp_from(j);
}

MethodEntry parse_method_json(std::string_view text) { return method_from(parse_text(text, "method")); }

MCConfig parse_study_json(std::string_view text) {
  const json j = parse_text(text, "study");
  check_keys(j, {"dgp", "boundary_point", "methods", "sample_sizes", "replications", "seed", "level"}, "study");
  MCConfig cfg;
  cfg.dgp = dgp_from(require(j, "dgp", "study"));
  cfg.x_c = ScorePoint(get_as<std::vector<double>>(require(j, "boundary_point", "study"), "boundary_point"));
  const auto& methods = require(j, "methods", "study");
  if (!methods.is_array()) throw ParseError("methods must be an array");
  for (const auto& m : methods) cfg.methods.push_back(method_from(m));
  const auto& sizes = require(j, "sample_sizes", "study");
  if (!sizes.is_array()) throw ParseError("sample_sizes must be an array");
  for (const auto& n : sizes) cfg.sample_sizes.push_back(get_count(n, "sample size"));
  cfg.replications = get_count(require(j, "replications", "study"), "replications");
  if (j.contains("seed")) cfg.master_seed = get_as<std::uint64_t>(j.at("seed"), "seed");
  if (j.contains("level")) cfg.level = get_as<double>(j.at("level"), "level");
  cfg.validate();
  return cfg;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MCConfig parse_study_file(const std::string& path) { return parse_study_json(read_text_file(path)); }

std::string rule_to_json(const AssignmentRule& rule) { return rule_to(rule).dump(); }

std::string dgp_to_json(const DGPSpec& spec) {
  ojson j;
  j["name"] = spec.name;
  j["score_law"] = {{"kind", score_law_name(spec.score_law.kind)}, {"sigma", spec.score_law.sigma}};
  j["cef"] = {{"degree", spec.cef.degree},
              {"basis", basis_name(spec.cef.basis)},
              {"treated", spec.cef.coeffs_treated},
              {"control", spec.cef.coeffs_control},
              {"centers", spec.cef.centers}};
  j["outcome"] = {{"kind", spec.outcome.kind == OutcomeKind::kGaussianNoise ? "gaussian_noise" : "bernoulli_logit"},
                  {"sigma", spec.outcome.sigma}};
  j["rule"] = rule_to(spec.rule);
  return j.dump(2);
}

std::string estimate_to_json(const EstimateOutput& o) {
  ojson j;
  j["method"] = o.method;
  j["at"] = std::vector<double>(o.at.coords().begin(), o.at.coords().end());
  j["estimate"] = o.report.estimate;
  j["std_error"] = o.report.std_error;
  j["level"] = o.report.level;
  j["ci_lower"] = o.report.ci_lower;
  j["ci_upper"] = o.report.ci_upper;
  j["n_treated"] = o.report.n_treated;
  j["n_control"] = o.report.n_control;
  if (o.method == "llr") {
    j["bandwidth"] = o.bandwidth;
  } else {
    j["buffer_epsilon"] = o.buffer_epsilon;
    j["buffer_floored"] = o.buffer_floored;
  }
  return j.dump(2);
}

std::string diagnostic_to_json(const DensityDiagnostic& d) {
  auto side = [](const SideDensity& s) {
    return ojson{{"density_near_zero", s.density_near_zero},
                 {"reference_density", s.reference_density},
                 {"ratio", s.ratio}};
  };
  ojson j;
  j["flagged"] = d.flagged;
  j["positive"] = side(d.positive);
  j["negative"] = side(d.negative);
  j["bins"] = d.bins;
  j["window"] = d.window;
  j["bin_width"] = d.bin_width;
  j["threshold"] = d.threshold;
  return j.dump(2);
}

std::string default_parameters_json() {
  ojson j;
  j["version"] = kVersion;
  for (RDMethod m : {RDMethod::kRf, RDMethod::kLlf, RDMethod::kLlr}) {
    const auto cfg = RDMethodConfig::defaults(m);
    ojson e;
    if (m == RDMethod::kLlr) {
      e["kernel"] = kernel_shape_name(cfg.kernel.shape);
      e["bandwidth"] = "rule_of_thumb";
    } else {
      const auto& f = cfg.forest;
      e["trees"] = f.num_trees;
      e["mtry"] = f.mtry;
      e["min_node_size"] = f.min_node_size;
      e["alpha"] = f.alpha;
      e["honesty_fraction"] = f.honesty_fraction;
      e["c_scale"] = f.c_scale;
      e["split_rule"] = split_rule_name(f.split_rule);
      if (m == RDMethod::kLlf) {
        if (f.ridge_lambda) e["lambda"] = *f.ridge_lambda;
        else e["lambda"] = "auto";
        e["standardize_penalty"] = f.standardize_penalty;
      }
      e["ci_group_size"] = f.ci_group_size;
      e["seed"] = f.seed;
      e["buffer_epsilon"] = cfg.buffer_epsilon;
    }
    e["level"] = cfg.level;
    j[std::string(rd_method_name(m))] = std::move(e);
  }
  j["diagnostic"] = {{"bins", kDefaultDiagnosticBins},
                     {"window", "range/200"},
                     {"threshold", kDefaultDiagnosticThreshold}};
  j["sample_chunk"] = kSampleChunk;
  return j.dump();
}

std::string default_parameters_fingerprint() {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : default_parameters_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rdforest
