#include "vehdet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vehdet/error.hpp"

namespace vehdet {

using nlohmann::json;

const std::array<std::string, kNumTaps>& tap_slot_names() {
  static const std::array<std::string, kNumTaps> names{"stage2", "stage3", "stage4", "extra1",
                                                       "extra2", "extra3", "extra4"};
  return names;
}

bool extra_layer_present(const NetworkConfig& cfg, int k) {
  if (cfg.extra_fallback == ExtraFallback::Plain) return true;
  for (int i = 0; i <= k; ++i) {
    if (!cfg.mincep_enabled[static_cast<std::size_t>(i)]) return false;
  }
  return true;
}

bool tap_present(const NetworkConfig& cfg, int t) {
  if (t == 0) return cfg.stage2_tap;
  if (t < 3) return true;
  return extra_layer_present(cfg, t - 3);
}

NetworkConfig baseline_config(NetworkConfig cfg) {
  cfg.stage2_tap = false;
  cfg.mincep_enabled.fill(false);
  cfg.extra_fallback = ExtraFallback::Plain;
  cfg.dab_enabled.fill(false);
  return cfg;
}

void NetworkConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (input_size < 32) fail("input_size must be at least 32");
  if (groups < 1) fail("groups must be positive");
  if (bottleneck_divisor < 1) fail("bottleneck_divisor must be positive");
  for (int w : stage_widths) {
    if (w < 1) fail("stage widths must be positive");
  }
  for (std::size_t s = 1; s < stage_widths.size(); ++s) {
    const int width = stage_widths[s];
    const int previous = stage_widths[s - 1];
    if (width <= previous) fail("each stage must be wider than the previous one");
    const int bottleneck = width / bottleneck_divisor;
    if (width % bottleneck_divisor != 0 || bottleneck % groups != 0 || bottleneck < groups) {
      fail("stage width " + std::to_string(width) + " gives a bottleneck not divisible by groups");
    }
    if (previous % groups != 0 || width % groups != 0 || (width - previous) % groups != 0) {
      fail("stage widths must be divisible by groups " + std::to_string(groups));
    }
  }
  for (int u : unit_counts) {
    if (u < 1) fail("unit counts must be positive");
  }
  for (int w : mincep_widths) {
    if (w < 6) fail("extra-layer widths must be at least 6");
  }
  for (int b : boxes_per_location) {
    if (b != 4 && b != 6) fail("boxes_per_location entries must be 4 or 6");
  }
  if (extra_fallback == ExtraFallback::None) {
    bool seen_off = false;
    for (bool on : mincep_enabled) {
      if (on && seen_off) fail("mincep_enabled must be a prefix unless extra_fallback is \"plain\"");
      seen_off = seen_off || !on;
    }
  }
  for (const Fraction& f : dab_portions) {
    if (f.num < 1 || f.den < 1 || f.num > f.den) fail("dab portion " + f.str() + " out of (0, 1]");
  }
  for (const Fraction& f : dab_branch_portions) {
    if (f.num < 1 || f.den < 1 || f.num > f.den) fail("dab branch portion out of (0, 1]");
  }
  if (num_classes < 2) fail("num_classes counts background and must be at least 2");
  if (!(prior_min_scale > 0.0 && prior_min_scale < prior_max_scale && prior_max_scale <= 1.0)) {
    fail("prior scales need 0 < min < max <= 1");
  }
  if (!(variances[0] > 0.0 && variances[1] > 0.0)) fail("variances must be positive");
  if (!(match_iou_threshold > 0.0 && match_iou_threshold <= 1.0)) fail("bad match_iou_threshold");
  if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0)) fail("bad nms_threshold");
  if (conf_threshold < 0.0) fail("conf_threshold must be non-negative");
  int taps = 0;
  for (int t = 0; t < kNumTaps; ++t) taps += tap_present(*this, t) ? 1 : 0;
  if (taps < 2) fail("the graph needs at least two taps");
}

namespace {

json fraction_to_json(const Fraction& f) {
  if (f.den == 1) return f.num;
  return f.str();
}

Fraction fraction_from_json(const json& j, const std::string& key) {
  if (j.is_number_integer()) return {j.get<int>(), 1};
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return {std::stoi(s), 1};
      return {std::stoi(s.substr(0, slash)), std::stoi(s.substr(slash + 1))};
    } catch (const std::exception&) {
      // fall through to the error below
    }
  }
  throw ConfigError(key + ": portions are written as \"num/den\" strings or integers");
}

template <typename T, std::size_t N>
void read_array(const json& j, const std::string& key, std::array<T, N>& out) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError(key + " must be an array of " + std::to_string(N) + " values");
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<T>();
}

template <std::size_t N>
void read_fractions(const json& j, const std::string& key, std::array<Fraction, N>& out) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError(key + " must be an array of " + std::to_string(N) + " portions");
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = fraction_from_json(j[i], key);
}

template <std::size_t N>
json fractions_to_json(const std::array<Fraction, N>& fs) {
  json arr = json::array();
  for (const Fraction& f : fs) arr.push_back(fraction_to_json(f));
  return arr;
}

}  // namespace

json config_to_json(const NetworkConfig& cfg) {
  json j;
  j["input_size"] = cfg.input_size;
  j["groups"] = cfg.groups;
  j["stage_widths"] = cfg.stage_widths;
  j["unit_counts"] = cfg.unit_counts;
  j["bottleneck_divisor"] = cfg.bottleneck_divisor;
  j["mincep_widths"] = cfg.mincep_widths;
  j["mincep_enabled"] = cfg.mincep_enabled;
  j["extra_fallback"] = cfg.extra_fallback == ExtraFallback::Plain ? "plain" : "none";
  j["stage2_tap"] = cfg.stage2_tap;
  j["dab_enabled"] = cfg.dab_enabled;
  j["dab_portions"] = fractions_to_json(cfg.dab_portions);
  j["dab_branch_portions"] = fractions_to_json(cfg.dab_branch_portions);
  j["boxes_per_location"] = cfg.boxes_per_location;
  j["num_classes"] = cfg.num_classes;
  j["pixel_mean"] = cfg.pixel_mean;
  j["prior_min_scale"] = cfg.prior_min_scale;
  j["prior_max_scale"] = cfg.prior_max_scale;
  j["variances"] = cfg.variances;
  j["match_iou_threshold"] = cfg.match_iou_threshold;
  j["conf_threshold"] = cfg.conf_threshold;
  j["nms_threshold"] = cfg.nms_threshold;
  return j;
}

NetworkConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  NetworkConfig cfg;
  static const std::set<std::string> known = [] {
    std::set<std::string> keys;
    const nlohmann::json defaults = config_to_json(NetworkConfig{});
    for (const auto& item : defaults.items()) keys.insert(item.key());
    return keys;
  }();
  try {
    for (const auto& item : j.items()) {
      const std::string& key = item.key();
      const json& v = item.value();
      if (!known.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
      if (key == "input_size") cfg.input_size = v.get<int>();
      else if (key == "groups") cfg.groups = v.get<int>();
      else if (key == "stage_widths") read_array(v, key, cfg.stage_widths);
      else if (key == "unit_counts") read_array(v, key, cfg.unit_counts);
      else if (key == "bottleneck_divisor") cfg.bottleneck_divisor = v.get<int>();
      else if (key == "mincep_widths") read_array(v, key, cfg.mincep_widths);
      else if (key == "mincep_enabled") read_array(v, key, cfg.mincep_enabled);
      else if (key == "extra_fallback") {
        const std::string s = v.get<std::string>();
        if (s == "none") cfg.extra_fallback = ExtraFallback::None;
        else if (s == "plain") cfg.extra_fallback = ExtraFallback::Plain;
        else throw ConfigError("extra_fallback must be \"none\" or \"plain\"");
      }
      else if (key == "stage2_tap") cfg.stage2_tap = v.get<bool>();
      else if (key == "dab_enabled") read_array(v, key, cfg.dab_enabled);
      else if (key == "dab_portions") read_fractions(v, key, cfg.dab_portions);
      else if (key == "dab_branch_portions") read_fractions(v, key, cfg.dab_branch_portions);
      else if (key == "boxes_per_location") read_array(v, key, cfg.boxes_per_location);
      else if (key == "num_classes") cfg.num_classes = v.get<int>();
      else if (key == "pixel_mean") read_array(v, key, cfg.pixel_mean);
      else if (key == "prior_min_scale") cfg.prior_min_scale = v.get<double>();
      else if (key == "prior_max_scale") cfg.prior_max_scale = v.get<double>();
      else if (key == "variances") read_array(v, key, cfg.variances);
      else if (key == "match_iou_threshold") cfg.match_iou_threshold = v.get<double>();
      else if (key == "conf_threshold") cfg.conf_threshold = v.get<double>();
      else if (key == "nms_threshold") cfg.nms_threshold = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

NetworkConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

NetworkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace vehdet
