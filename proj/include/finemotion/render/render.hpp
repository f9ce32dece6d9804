#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finemotion/common/error.hpp"
#include "finemotion/motion/motion.hpp"

namespace finemotion::render {

enum class RenderErrc { UnknownSchema, WriteError, BadConfig };
using RenderError = Error<RenderErrc>;

// 8-bit grayscale, row-major, top row first.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const Image&, const Image&) = default;
};

std::vector<std::uint8_t> encode_png(const Image& image);
// Every frame is shown for 1/fps seconds; loops forever.
std::vector<std::uint8_t> encode_apng(std::span<const Image> frames, double fps);

// Orthographic front view: world X to the image's horizontal axis (centred
// on X = 0) and Y up. Z is dropped.
struct RenderConfig {
  int width = 161;
  int height = 161;
  double half_width = 1.2;  // world units from the centre to the left/right edge
  double y_center = 0.9;
  double bone_px = 1.5;     // stroke half-width
  double joint_px = 3.0;    // joint dot radius
  bool ground = true;

  void validate() const;
};

// Bones follow the schema skeleton's parent links; throws UnknownSchema for
// layouts without world-space joint positions.
Image render_frame(const motion::MotionSequence& m, int frame, const RenderConfig& cfg = {});
std::vector<Image> render_motion(const motion::MotionSequence& m, const RenderConfig& cfg = {});

enum class RenderFormat { PngFrames, Animated };

// PngFrames: `out_dir/frame_0000.png` ...; Animated: `out_dir/motion.png`
// (APNG). Returns the written paths.
std::vector<std::filesystem::path> write_render(const motion::MotionSequence& m, const std::filesystem::path& out_dir,
                                                RenderFormat format, const RenderConfig& cfg = {});

}  // namespace finemotion::render
