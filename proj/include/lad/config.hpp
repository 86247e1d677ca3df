#pragma once

// Run configuration shared by the CLI subcommands, with validation that
// reports every problem at once.

#include "lad/io.hpp"

namespace lad {

struct RunConfig {
  std::string detector = "lad";           // rxd | rxd-p | lad | lad-p | lad-s
  std::string weights = "cauchy";         // partial-correlation | cauchy
  std::string laplacian = "sym";          // sym | comb
  std::optional<double> alpha;            // Cauchy scale; mean of band means when unset
  double psi = 0.99;
  std::optional<std::size_t> p;           // fixed truncation; overrides psi
  double t = 0.5;
  double spatial_weight = 1.0;
  std::optional<int> connectivity;        // 4 or 6; derived from the cube when unset
  double ridge = 0.0;
  std::uint64_t seed = 0;
  std::string input;
  std::string output;
  std::string model;
  std::string discard_bands;              // 1-based list such as "108-112,154-167,224"
  bool water_bands = false;
};

/// Parses "3,5-7,10" into {3,5,6,7,10}.
inline std::vector<std::size_t> parse_band_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item.empty()) continue;
    const auto dash = item.find('-');
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        const auto v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(static_cast<std::size_t>(v));
      } else {
        const auto lo = std::stoull(item.substr(0, dash), &used);
        if (used != dash) throw std::invalid_argument(item);
        const auto hi_text = item.substr(dash + 1);
        const auto hi = std::stoull(hi_text, &used);
        if (used != hi_text.size() || hi < lo) throw std::invalid_argument(item);
        for (auto b = lo; b <= hi; ++b) out.push_back(static_cast<std::size_t>(b));
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::invalid_config, "malformed band list entry", {{"entry", item}});
    }
  }
  return out;
}

inline LaplacianVariant parse_laplacian(const std::string& s) {
  return s == "comb" ? LaplacianVariant::combinatorial : LaplacianVariant::symmetric_normalized;
}

/// Every violated constraint, in a stable order. Empty when valid.
inline std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> errors;
  static const std::set<std::string> detectors{"rxd", "rxd-p", "lad", "lad-p", "lad-s"};
  if (!detectors.count(c.detector)) errors.push_back("detector must be one of rxd, rxd-p, lad, lad-p, lad-s (got '" + c.detector + "')");
  if (c.weights != "partial-correlation" && c.weights != "cauchy") {
    errors.push_back("weights must be partial-correlation or cauchy (got '" + c.weights + "')");
  }
  if (c.laplacian != "sym" && c.laplacian != "comb") errors.push_back("laplacian must be sym or comb (got '" + c.laplacian + "')");
  if (c.alpha && !(*c.alpha > 0.0)) errors.push_back("alpha must be positive");
  if (!(c.psi > 0.0 && c.psi <= 1.0)) errors.push_back("psi must lie in (0, 1]");
  if (c.p && *c.p < 1) errors.push_back("p must be >= 1");
  if (!(c.t >= 0.0 && c.t <= 1.0)) errors.push_back("t must lie in [0, 1]");
  if (!(c.spatial_weight >= 0.0) || !std::isfinite(c.spatial_weight)) errors.push_back("spatial-weight must be finite and >= 0");
  if (c.connectivity && *c.connectivity != 4 && *c.connectivity != 6) errors.push_back("connectivity must be 4 or 6");
  if (!(c.ridge >= 0.0) || !std::isfinite(c.ridge)) errors.push_back("ridge must be finite and >= 0");
  if (!c.discard_bands.empty()) {
    try {
      for (auto b : parse_band_list(c.discard_bands)) {
        if (b < 1) {
          errors.push_back("band indices are 1-based");
          break;
        }
      }
    } catch (const Error& e) {
      errors.push_back(std::string(e.what()) + ": " + e.context().at("entry"));
    }
  }
  return errors;
}

/// Bands to drop (1-based) according to the config.
inline std::vector<std::size_t> bands_to_discard(const RunConfig& c) {
  std::vector<std::size_t> out = parse_band_list(c.discard_bands);
  if (c.water_bands) {
    const auto water = io::aviris_water_bands();
    out.insert(out.end(), water.begin(), water.end());
  }
  return out;
}

}  // namespace lad
