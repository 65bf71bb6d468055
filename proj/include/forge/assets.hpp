#pragma once

#include <string>

#include <json.hpp>

namespace forge {

struct AssetRequest {
  std::string path;    // bundle-relative, e.g. "assets/hero.png"
  std::string kind;    // "image" or "chart"
  std::string prompt;  // description for images
  nlohmann::json spec = nlohmann::json::object();  // declarative chart spec
};

// Supplies bytes for image and chart assets. Implementations throw
// AssemblyError naming the asset when they cannot produce it.
class AssetProvider {
public:
  virtual ~AssetProvider() = default;
  virtual std::string fetch(const AssetRequest& request) = 0;
};

// Deterministic stand-in: solid-colour PNG placeholders keyed by the prompt
// and SVG charts rendered from the spec.
//   calendar_heatmap: {year, month, bands: [{from, to, color, label}], marked: [day...]}
//   line:             {x_labels: [...], series: [{name, color, values: [...]}], y_max}
//   bar:              {bars: [{label, value, color}]}
class StubAssetProvider final : public AssetProvider {
public:
  std::string fetch(const AssetRequest& request) override;
};

// Minimal RGB PNG (8-bit, no interlace) filled with one colour.
std::string solid_png(int width, int height, unsigned char r, unsigned char g, unsigned char b);
std::string render_chart_svg(const nlohmann::json& spec);

} // namespace forge
