#include "unires/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace unires {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(char(ch));
  }
  return tok;
}

int parse_int(const std::string& tok, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ImageIoError("malformed header in " + path.string());
  }
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  const std::string magic = next_token(in);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw ImageIoError("unsupported image format in " + path.string() + " (expected P5/P6)");
  }
  const int width = parse_int(next_token(in), path);
  const int height = parse_int(next_token(in), path);
  const int maxval = parse_int(next_token(in), path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw ImageIoError("invalid header values in " + path.string());
  }
  const int bytes = maxval > 255 ? 2 : 1;
  const std::size_t count = std::size_t(width) * height * channels;
  std::vector<unsigned char> raw(count * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (std::size_t(in.gcount()) != raw.size()) throw ImageIoError("truncated pixel data in " + path.string());

  Image img(channels, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = (std::size_t(y) * width + x) * channels + c;
        const unsigned v = bytes == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        img.at(c, y, x) = double(std::min<unsigned>(v, maxval)) / maxval;
      }
    }
  }
  return img;
}

void save_image(const Image& img, const std::filesystem::path& path, BitDepth depth) {
  if (img.empty()) throw ImageIoError("cannot save an empty image");
  const int maxval = depth == BitDepth::k16 ? 65535 : 255;
  const int bytes = depth == BitDepth::k16 ? 2 : 1;
  const int channels = img.channels();
  std::vector<unsigned char> raw(std::size_t(img.size()) * bytes);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = (std::size_t(y) * img.width() + x) * channels + c;
        const double s = std::clamp(img.at(c, y, x), 0.0, 1.0);
        const unsigned v = unsigned(std::lround(s * maxval));
        if (bytes == 2) {
          raw[2 * i] = static_cast<unsigned char>(v >> 8);
          raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
        } else {
          raw[i] = static_cast<unsigned char>(v);
        }
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << (channels == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!out) throw ImageIoError("write failed for " + path.string());
}

}  // namespace unires
