#include "rsinet/raster.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace rsinet {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

RasterImage load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, "load_raster: cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png, "load_raster: png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("load_raster: png init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("load_raster: corrupt PNG " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
  png_read_update_info(png, info);

  RasterImage img;
  img.height = png_get_image_height(png, info);
  img.width = png_get_image_width(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  require(img.bit_depth == 8 || img.bit_depth == 16,
          "load_raster: unsupported PNG bit depth");

  const std::size_t row_samples = img.width * img.channels;
  img.samples.resize(img.height * row_samples);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (std::size_t y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    if (img.bit_depth == 8) {
      for (std::size_t i = 0; i < row_samples; ++i)
        img.samples[y * row_samples + i] = row[i];
    } else {
      std::memcpy(img.samples.data() + y * row_samples, row.data(),
                  row_samples * sizeof(std::uint16_t));
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct TiffReader {
  std::vector<std::uint8_t> bytes;
  bool little_endian = true;

  std::uint16_t u16(std::size_t off) const {
    require(off + 2 <= bytes.size(), "load_raster: truncated TIFF");
    return little_endian
               ? static_cast<std::uint16_t>(bytes[off] | bytes[off + 1] << 8)
               : static_cast<std::uint16_t>(bytes[off] << 8 | bytes[off + 1]);
  }
  std::uint32_t u32(std::size_t off) const {
    require(off + 4 <= bytes.size(), "load_raster: truncated TIFF");
    if (little_endian)
      return bytes[off] | bytes[off + 1] << 8 | bytes[off + 2] << 16 |
             static_cast<std::uint32_t>(bytes[off + 3]) << 24;
    return static_cast<std::uint32_t>(bytes[off]) << 24 |
           bytes[off + 1] << 16 | bytes[off + 2] << 8 | bytes[off + 3];
  }
};

// Uncompressed striped TIFF, chunky planar layout, 8 or 16 bits/sample.
RasterImage load_tiff(const std::string& path) {
  TiffReader t;
  {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_raster: cannot open " + path);
    t.bytes.assign(std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>());
  }
  require(t.bytes.size() >= 8, "load_raster: truncated TIFF");
  if (t.bytes[0] == 'I' && t.bytes[1] == 'I')
    t.little_endian = true;
  else if (t.bytes[0] == 'M' && t.bytes[1] == 'M')
    t.little_endian = false;
  else
    fail("load_raster: not a TIFF file: " + path);
  require(t.u16(2) == 42, "load_raster: bad TIFF magic");

  const std::uint32_t ifd = t.u32(4);
  const std::uint16_t n_entries = t.u16(ifd);

  std::uint32_t width = 0, height = 0, bits = 8, compression = 1,
                samples_per_pixel = 1, rows_per_strip = 0xffffffff,
                planar = 1;
  std::vector<std::uint32_t> strip_offsets, strip_counts;

  auto read_values = [&](std::size_t entry, std::vector<std::uint32_t>& out) {
    const std::uint16_t type = t.u16(entry + 2);
    const std::uint32_t count = t.u32(entry + 4);
    const std::size_t elem = type == 3 ? 2 : 4;  // SHORT or LONG
    require(type == 3 || type == 4, "load_raster: unexpected TIFF tag type");
    const std::size_t total = elem * count;
    std::size_t off = total <= 4 ? entry + 8 : t.u32(entry + 8);
    for (std::uint32_t i = 0; i < count; ++i)
      out.push_back(elem == 2 ? t.u16(off + 2 * i) : t.u32(off + 4 * i));
  };

  for (std::uint16_t e = 0; e < n_entries; ++e) {
    const std::size_t entry = ifd + 2 + e * 12;
    const std::uint16_t tag = t.u16(entry);
    std::vector<std::uint32_t> vals;
    switch (tag) {
      case 256: read_values(entry, vals); width = vals.at(0); break;
      case 257: read_values(entry, vals); height = vals.at(0); break;
      case 258:
        read_values(entry, vals);
        bits = vals.at(0);
        for (std::uint32_t b : vals)
          require(b == bits, "load_raster: mixed TIFF bit depths");
        break;
      case 259: read_values(entry, vals); compression = vals.at(0); break;
      case 273: read_values(entry, strip_offsets); break;
      case 277: read_values(entry, vals); samples_per_pixel = vals.at(0); break;
      case 278: read_values(entry, vals); rows_per_strip = vals.at(0); break;
      case 279: read_values(entry, strip_counts); break;
      case 284: read_values(entry, vals); planar = vals.at(0); break;
      default: break;
    }
  }
  require(width > 0 && height > 0, "load_raster: TIFF missing extents");
  require(compression == 1,
          "load_raster: only uncompressed TIFF is supported");
  require(planar == 1, "load_raster: only chunky TIFF layout is supported");
  require(bits == 8 || bits == 16, "load_raster: unsupported TIFF bit depth");
  require(!strip_offsets.empty() &&
              strip_offsets.size() == strip_counts.size(),
          "load_raster: bad TIFF strip table");

  RasterImage img;
  img.height = height;
  img.width = width;
  img.channels = samples_per_pixel;
  img.bit_depth = bits;
  img.samples.reserve(height * width * samples_per_pixel);
  for (std::size_t s = 0; s < strip_offsets.size(); ++s) {
    const std::size_t off = strip_offsets[s];
    const std::size_t count = strip_counts[s];
    require(off + count <= t.bytes.size(), "load_raster: truncated TIFF");
    if (bits == 8) {
      for (std::size_t i = 0; i < count; ++i)
        img.samples.push_back(t.bytes[off + i]);
    } else {
      require(count % 2 == 0, "load_raster: odd TIFF strip length");
      for (std::size_t i = 0; i < count; i += 2)
        img.samples.push_back(t.u16(off + i));
    }
  }
  require(img.samples.size() == height * width * samples_per_pixel,
          "load_raster: TIFF sample count mismatch");
  (void)rows_per_strip;
  return img;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  std::string tail = s.substr(s.size() - suffix.size());
  for (char& c : tail) c = static_cast<char>(std::tolower(c));
  return tail == suffix;
}

}  // namespace

RasterImage load_raster_image(const std::string& path) {
  if (has_suffix(path, ".png")) return load_png(path);
  if (has_suffix(path, ".tif") || has_suffix(path, ".tiff"))
    return load_tiff(path);
  fail("load_raster: unsupported format (PNG or TIFF expected): " + path);
}

Tensor raster_to_tensor(const RasterImage& img,
                        const std::vector<std::size_t>& channel_order) {
  std::vector<std::size_t> order = channel_order;
  if (order.empty())
    for (std::size_t c = 0; c < img.channels; ++c) order.push_back(c);
  for (std::size_t c : order)
    require(c < img.channels, "raster_to_tensor: channel index out of range");
  const double scale = img.bit_depth == 8 ? 255.0 : 65535.0;
  const std::size_t plane = img.height * img.width;
  std::vector<double> data(order.size() * plane);
  for (std::size_t k = 0; k < order.size(); ++k)
    for (std::size_t p = 0; p < plane; ++p)
      data[k * plane + p] =
          static_cast<double>(img.samples[p * img.channels + order[k]]) /
          scale;
  return Tensor::from_data({order.size(), img.height, img.width},
                           std::move(data));
}

LoadedRaster load_raster(const std::string& path,
                         const std::vector<std::size_t>& channel_order) {
  RasterImage img = load_raster_image(path);
  LoadedRaster out;
  out.source_channels = img.channels;
  out.bit_depth = img.bit_depth;
  out.tensor = raster_to_tensor(img, channel_order);
  return out;
}

namespace {

void write_png(const std::string& path, std::size_t height, std::size_t width,
               int color_type, int bit_depth, const std::uint8_t* rows_data,
               std::size_t row_bytes, const std::vector<Rgb>* palette) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, "write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  require(png, "write_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("write_png: init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("write_png: write error " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_color> pal;
  if (palette) {
    for (const Rgb& c : *palette) pal.push_back({c[0], c[1], c[2]});
    png_set_PLTE(png, info, pal.data(), static_cast<int>(pal.size()));
  }
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rows_data + y * row_bytes));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_rgb8(const std::string& path, std::size_t height,
                    std::size_t width, const std::vector<std::uint8_t>& rgb) {
  require(rgb.size() == height * width * 3, "write_png: size mismatch");
  write_png(path, height, width, PNG_COLOR_TYPE_RGB, 8, rgb.data(), width * 3,
            nullptr);
}

void write_png_gray8(const std::string& path, std::size_t height,
                     std::size_t width,
                     const std::vector<std::uint8_t>& gray) {
  require(gray.size() == height * width, "write_png: size mismatch");
  write_png(path, height, width, PNG_COLOR_TYPE_GRAY, 8, gray.data(), width,
            nullptr);
}

void write_png_indexed(const std::string& path, std::size_t height,
                       std::size_t width, const std::vector<int32_t>& labels,
                       const std::vector<Rgb>& palette) {
  require(labels.size() == height * width, "write_png: size mismatch");
  require(!palette.empty() && palette.size() <= 256,
          "write_png: palette must have 1..256 entries");
  std::vector<std::uint8_t> rows(height * width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 &&
                static_cast<std::size_t>(labels[i]) < palette.size(),
            "write_png: label outside palette");
    rows[i] = static_cast<std::uint8_t>(labels[i]);
  }
  write_png(path, height, width, PNG_COLOR_TYPE_PALETTE, 8, rows.data(),
            width, &palette);
}

}  // namespace rsinet
