#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpagent/image.hpp"
#include "vpagent/mask.hpp"

namespace vpa {

enum class VpType { rectangle, mask_contour, ellipse, triangle, scribble, point, arrow, set_of_mark };

inline constexpr std::array<VpType, 8> kAllVpTypes = {VpType::rectangle, VpType::mask_contour, VpType::ellipse,
                                                       VpType::triangle,  VpType::scribble,     VpType::point,
                                                       VpType::arrow,     VpType::set_of_mark};

std::string_view to_string(VpType t);
std::optional<VpType> parse_vp_type(std::string_view s);

struct RenderStyle {
  Rgb color{255, 0, 0};
  int stroke_px = 3;
  std::uint64_t seed = 0;
  int label_font_px = 16;
  /// Arrow tail offset from the bounding box's top-right corner.
  int arrow_offset_px = 20;

  /// Throws ConfigError for stroke_px < 1 or label_font_px < 1.
  void validate() const;
};

/// Draws the annotation on a copy of `frame`. Box-like prompts anchor to the
/// largest component; mask_contour outlines every component. Throws
/// EmptyMask / DimensionMismatch.
Image render_prompt(const Image& frame, const Mask& mask, VpType vp, const RenderStyle& style = {},
                    std::optional<int> mark_number = 1);

/// Vertices of the seeded scribble walk; every vertex is a mask cell of the
/// largest component.
std::vector<Point> scribble_path(const Mask& mask, const RenderStyle& style);

inline constexpr std::string_view kVpToken = "<vp>";

/// The canonical reference phrase for a prompt type.
std::string vp_phrase(VpType vp, std::optional<int> mark_number);

/// Replaces the single `<vp>` token. Throws MissingPlaceholder /
/// MultiplePlaceholders.
std::string substitute_vp(std::string_view question, VpType vp, std::optional<int> mark_number);

/// Replaces every `<vp>` token (none is fine); used for options and answers.
std::string substitute_vp_all(std::string_view text, VpType vp, std::optional<int> mark_number);

std::size_t count_vp_tokens(std::string_view text);

}  // namespace vpa
