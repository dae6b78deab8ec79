#include "wsvt/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#ifdef WSVT_HAVE_PNG
#include <png.h>
#endif

#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"

namespace wsvt {

namespace fs = std::filesystem;

namespace {

class PgmReader {
 public:
  PgmReader(std::string data, const fs::path& path) : data_(std::move(data)), path_(path) {}

  // Next whitespace-delimited header token, skipping '#' comments.
  long next_int() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an integer");
    const std::string tok = data_.substr(start, pos_ - start);
    if (tok.size() > 9) fail("integer out of range");
    return std::stol(tok);
  }

  std::string magic() {
    if (data_.size() < 2) fail("truncated header");
    pos_ = 2;
    return data_.substr(0, 2);
  }

  // Exactly one whitespace byte separates the header from binary samples.
  void skip_single_space() {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_]))) fail("malformed header");
    ++pos_;
  }

  unsigned char byte() {
    if (pos_ >= data_.size()) fail("truncated pixel data");
    return static_cast<unsigned char>(data_[pos_++]);
  }

  [[noreturn]] void fail(const std::string& why) const { throw_io(path_.string() + ": invalid PGM: " + why); }

 private:
  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      const auto c = static_cast<unsigned char>(data_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string data_;
  fs::path path_;
  std::size_t pos_ = 0;
};

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Frame read_pgm(const fs::path& path) {
  PgmReader r(read_file(path), path);
  const std::string magic = r.magic();
  if (magic != "P5" && magic != "P2") r.fail("unsupported magic '" + magic + "'");
  const long w = r.next_int();
  const long h = r.next_int();
  const long maxval = r.next_int();
  if (w < 1 || h < 1 || w > 65535 || h > 65535) r.fail("bad dimensions");
  if (maxval < 1 || maxval > 65535) r.fail("bad maxval");

  const double scale = 255.0 / static_cast<double>(maxval);
  std::vector<double> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  if (magic == "P2") {
    for (double& p : px) {
      const long v = r.next_int();
      if (v > maxval) r.fail("sample exceeds maxval");
      p = static_cast<double>(v) * scale;
    }
  } else {
    r.skip_single_space();
    for (double& p : px) {
      long v = r.byte();
      if (maxval > 255) v = (v << 8) | r.byte();
      if (v > maxval) r.fail("sample exceeds maxval");
      p = static_cast<double>(v) * scale;
    }
  }
  return Frame(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

void write_pgm(const fs::path& path, const Frame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
  out.reserve(out.size() + frame.size());
  for (double p : frame.pixels()) out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(p))));
  write_file_atomic(path, out);
}

bool png_supported() noexcept {
#ifdef WSVT_HAVE_PNG
  return true;
#else
  return false;
#endif
}

Frame read_png(const fs::path& path) {
#ifdef WSVT_HAVE_PNG
  const std::string data = read_file(path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, data.data(), data.size()))
    throw_io(path.string() + ": invalid PNG: " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw_io(path.string() + ": invalid PNG: " + msg);
  }
  std::vector<double> px(buffer.begin(), buffer.end());
  return Frame(static_cast<int>(image.width), static_cast<int>(image.height), std::move(px));
#else
  throw_io(path.string() + ": PNG support was not compiled in; convert frames to PGM");
#endif
}

bool is_image_file(const fs::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".pgm" || ext == ".pnm" || ext == ".png";
}

Frame read_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
  throw_io(path.string() + ": unsupported image extension '" + ext + "'");
}

}  // namespace wsvt
