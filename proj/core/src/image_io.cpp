#include "mug/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>

#include <jpeglib.h>

#include "mug/error.hpp"

namespace mug::image {

namespace {

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_jpeg(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ParseError("cannot open image " + path.string());

  jpeg_decompress_struct cinfo{};
  JpegErrorManager jerr{};
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = on_jpeg_error;
  // Objects with non-trivial destructors must not live across setjmp.
  Image* result = new Image();
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    delete result;
    throw ParseError("cannot decode JPEG " + path.string() + ": " + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  result->width = static_cast<int>(cinfo.output_width);
  result->height = static_cast<int>(cinfo.output_height);
  result->rgb.resize(static_cast<std::size_t>(result->width) * result->height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = result->rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * result->width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  Image out = std::move(*result);
  delete result;
  return out;
}

// Skips whitespace and '#' comments in a PPM header.
int read_ppm_int(std::istream& in) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (c == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  return v;
}

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open image " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw ParseError("unsupported PPM variant in " + path.string());
  Image img;
  img.width = read_ppm_int(in);
  img.height = read_ppm_int(in);
  const int maxval = read_ppm_int(in);
  if (img.width <= 0 || img.height <= 0 || maxval != 255) {
    throw ParseError("bad PPM header in " + path.string());
  }
  in.get();
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw ParseError("truncated PPM " + path.string());
  }
  return img;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Image load(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".ppm") return load_ppm(path);
  if (ext == ".jpg" || ext == ".jpeg") return load_jpeg(path);
  throw ParseError("unsupported image format '" + ext + "' for " + path.string());
}

void save_jpeg(const std::filesystem::path& path, const Image& img, int quality) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot write " + path.string());
  jpeg_compress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, file.get());
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(img.rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

void save_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

std::vector<double> resize_planar(const Image& img, int side) {
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  std::vector<double> out(plane * 3, 0.0);
  if (img.width <= 0 || img.height <= 0) return out;
  const double sx = static_cast<double>(img.width) / side;
  const double sy = static_cast<double>(img.height) / side;
  for (int y = 0; y < side; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < side; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bottom = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out[c * plane + static_cast<std::size_t>(y) * side + x] = ((1 - wy) * top + wy * bottom) / 255.0;
      }
    }
  }
  return out;
}

double mean_intensity(const Image& img) {
  if (img.rgb.empty()) return 0.0;
  const double sum = std::accumulate(img.rgb.begin(), img.rgb.end(), 0.0);
  return sum / static_cast<double>(img.rgb.size());
}

}  // namespace mug::image
