#include "hashtrace/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace hashtrace {

namespace fs = std::filesystem;

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) {
    throw std::invalid_argument("invalid image shape");
  }
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return true;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return !tok.empty();
}

}  // namespace

Image read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic, ws, hs, ms;
  if (!next_token(in, magic) || !next_token(in, ws) || !next_token(in, hs) ||
      !next_token(in, ms)) {
    throw std::runtime_error(path.string() + ": truncated PNM header");
  }
  int channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw std::runtime_error(path.string() + ": not a binary PPM/PGM (magic '" + magic + "')");
  }
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ws);
    h = std::stoi(hs);
    maxval = std::stoi(ms);
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": malformed PNM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error(path.string() + ": unsupported PNM dimensions or maxval");
  }
  Image img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  return img;
}

void write_pnm(const fs::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << '\n'
      << img.width << ' ' << img.height << '\n'
      << 255 << '\n';
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<fs::path> list_frames(const fs::path& dir, const std::string& prefix,
                                  const std::string& ext) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > prefix.size() + ext.size() && name.starts_with(prefix) &&
        name.ends_with(ext)) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

Frames read_frames(const fs::path& dir, const std::string& prefix, const std::string& ext) {
  Frames frames;
  for (const auto& p : list_frames(dir, prefix, ext)) frames.push_back(read_pnm(p));
  return frames;
}

std::string frame_name(const std::string& prefix, std::size_t index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return prefix + buf + ext;
}

}  // namespace hashtrace

namespace hashtrace {

Image resample_affine(const Image& src, int out_w, int out_h, double x0, double sx, double y0,
                      double sy) {
  Image out(out_w, out_h, src.channels);
  const int C = src.channels;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp(y0 + y * sy, 0.0, static_cast<double>(src.height - 1));
    const int iy0 = static_cast<int>(fy);
    const int iy1 = std::min(iy0 + 1, src.height - 1);
    const double wy = fy - iy0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp(x0 + x * sx, 0.0, static_cast<double>(src.width - 1));
      const int ix0 = static_cast<int>(fx);
      const int ix1 = std::min(ix0 + 1, src.width - 1);
      const double wx = fx - ix0;
      for (int c = 0; c < C; ++c) {
        const double top = src.at(iy0, ix0, c) * (1.0 - wx) + src.at(iy0, ix1, c) * wx;
        const double bot = src.at(iy1, ix0, c) * (1.0 - wx) + src.at(iy1, ix1, c) * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace hashtrace
