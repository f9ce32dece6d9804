#include "finemotion/render/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <zlib.h>

namespace finemotion::render {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5], const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

// Filter byte 0 on every scanline, then zlib at a fixed level.
std::vector<std::uint8_t> deflate_image(const Image& image) {
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(image.height) * (image.width + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const auto row = image.pixels.begin() + static_cast<std::ptrdiff_t>(y) * image.width;
    raw.insert(raw.end(), row, row + image.width);
  }
  uLongf size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(size);
  if (compress2(out.data(), &size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw RenderError(RenderErrc::WriteError, "zlib compression failed");
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> header(const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw RenderError(RenderErrc::BadConfig, "malformed image");
  static constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // 8-bit grayscale, no interlace
  put_chunk(out, "IHDR", ihdr);
  return out;
}

struct Point {
  double x, y;
};

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = p.x - (a.x + t * dx), ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  auto out = header(image);
  put_chunk(out, "IDAT", deflate_image(image));
  put_chunk(out, "IEND", {});
  return out;
}

std::vector<std::uint8_t> encode_apng(std::span<const Image> frames, double fps) {
  if (frames.empty()) throw RenderError(RenderErrc::BadConfig, "no frames");
  if (!(fps > 0.0)) throw RenderError(RenderErrc::BadConfig, "fps must be positive");
  for (const auto& f : frames)
    if (f.width != frames[0].width || f.height != frames[0].height)
      throw RenderError(RenderErrc::BadConfig, "frames differ in size");
  auto out = header(frames[0]);
  std::vector<std::uint8_t> actl;
  put_u32(actl, static_cast<std::uint32_t>(frames.size()));
  put_u32(actl, 0);
  put_chunk(out, "acTL", actl);
  const auto delay_ms = static_cast<std::uint16_t>(std::clamp(std::lround(1000.0 / fps), 1L, 65535L));
  std::uint32_t seq = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::vector<std::uint8_t> fctl;
    put_u32(fctl, seq++);
    put_u32(fctl, static_cast<std::uint32_t>(frames[i].width));
    put_u32(fctl, static_cast<std::uint32_t>(frames[i].height));
    put_u32(fctl, 0);
    put_u32(fctl, 0);
    put_u16(fctl, delay_ms);
    put_u16(fctl, 1000);
    fctl.push_back(0);  // dispose: none
    fctl.push_back(0);  // blend: source
    put_chunk(out, "fcTL", fctl);
    const auto data = deflate_image(frames[i]);
    if (i == 0) {
      put_chunk(out, "IDAT", data);
    } else {
      std::vector<std::uint8_t> fdat;
      put_u32(fdat, seq++);
      fdat.insert(fdat.end(), data.begin(), data.end());
      put_chunk(out, "fdAT", fdat);
    }
  }
  put_chunk(out, "IEND", {});
  return out;
}

void RenderConfig::validate() const {
  if (width < 8 || height < 8) throw RenderError(RenderErrc::BadConfig, "image must be at least 8x8");
  if (!(half_width > 0.0)) throw RenderError(RenderErrc::BadConfig, "half_width must be positive");
  if (bone_px < 0.0 || joint_px < 0.0) throw RenderError(RenderErrc::BadConfig, "negative stroke size");
}

Image render_frame(const motion::MotionSequence& m, int frame, const RenderConfig& cfg) {
  cfg.validate();
  const motion::FeatureSchema* schema = nullptr;
  try {
    schema = &motion::find_schema(m.schema_id);
  } catch (const ErrorBase&) {
    throw RenderError(RenderErrc::UnknownSchema, "unknown schema '" + m.schema_id + "'");
  }
  if (schema->joint_xyz.empty())
    throw RenderError(RenderErrc::UnknownSchema, "schema '" + m.schema_id + "' has no joint positions");
  if (m.dim() != schema->dim) throw RenderError(RenderErrc::BadConfig, "motion does not match its schema");
  if (m.normalized) throw RenderError(RenderErrc::BadConfig, "denormalize the motion before rendering");
  if (frame < 0 || frame >= m.frames()) throw RenderError(RenderErrc::BadConfig, "frame out of range");

  // Pixel-centre coordinates are symmetric about the vertical midline, so a
  // mirrored motion rasterizes to the exact horizontal flip.
  const double scale = cfg.width / (2.0 * cfg.half_width);
  std::vector<Point> joints;
  for (int c : schema->joint_xyz)
    joints.push_back({m.features(frame, c) * scale, (cfg.y_center - m.features(frame, c + 1)) * scale});
  const double ground_y = cfg.y_center * scale;

  Image img(cfg.width, cfg.height, 255);
  for (int py = 0; py < cfg.height; ++py) {
    const double y = py + 0.5 - cfg.height / 2.0;
    for (int px = 0; px < cfg.width; ++px) {
      const Point p{px + 0.5 - cfg.width / 2.0, y};
      std::uint8_t value = 255;
      if (cfg.ground && std::abs(y - ground_y) <= 0.5) value = 170;
      for (std::size_t j = 0; j < joints.size() && value != 0; ++j) {
        const int parent = schema->skeleton.parent[j];
        if (parent >= 0 && segment_distance(p, joints[parent], joints[j]) <= cfg.bone_px) value = 0;
        if (segment_distance(p, joints[j], joints[j]) <= cfg.joint_px) value = 0;
      }
      img.at(px, py) = value;
    }
  }
  return img;
}

std::vector<Image> render_motion(const motion::MotionSequence& m, const RenderConfig& cfg) {
  std::vector<Image> out;
  out.reserve(m.frames());
  for (int f = 0; f < m.frames(); ++f) out.push_back(render_frame(m, f, cfg));
  return out;
}

std::vector<std::filesystem::path> write_render(const motion::MotionSequence& m, const std::filesystem::path& out_dir,
                                                RenderFormat format, const RenderConfig& cfg) {
  const auto frames = render_motion(m, cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw RenderError(RenderErrc::WriteError, "cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RenderError(RenderErrc::WriteError, "cannot write " + path.string());
  };
  std::vector<std::filesystem::path> paths;
  if (format == RenderFormat::Animated) {
    paths.push_back(out_dir / "motion.png");
    write(paths.back(), encode_apng(frames, m.fps));
    return paths;
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.png", i);
    paths.push_back(out_dir / name);
    write(paths.back(), encode_png(frames[i]));
  }
  return paths;
}

}  // namespace finemotion::render
