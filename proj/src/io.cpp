#include "mlat/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mlat {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Reads the next header token, skipping whitespace and comments.
std::string header_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.get();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    if (c == EOF) break;
    tok.push_back(char(c));
  }
  return tok;
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_header(std::istream& in) {
  PnmHeader h;
  h.magic = header_token(in);
  try {
    h.width = std::stoi(header_token(in));
    h.height = std::stoi(header_token(in));
    h.maxval = std::stoi(header_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("malformed PNM header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw std::runtime_error("malformed PNM header");
  return h;
}

std::uint16_t to_level(float v, int maxval) {
  return std::uint16_t(std::lround(std::clamp(double(v), 0.0, 1.0) * maxval));
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const RgbImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("write_ppm: bit depth must be 8 or 16");
  const int maxval = (1 << bit_depth) - 1;
  auto out = open_out(path, true);
  out << "P6\n" << image.cols() << ' ' << image.rows() << '\n' << maxval << '\n';
  std::vector<unsigned char> buf;
  buf.reserve(std::size_t(image.rows() * image.cols() * 3 * (bit_depth / 8)));
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c)
      for (int k = 0; k < 3; ++k) {
        const std::uint16_t v = to_level(image.channel[std::size_t(k)](r, c), maxval);
        if (bit_depth == 16) buf.push_back(static_cast<unsigned char>(v >> 8));
        buf.push_back(static_cast<unsigned char>(v & 0xff));
      }
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const PnmHeader h = read_header(in);
  if (h.magic != "P6") throw std::runtime_error(path.string() + ": not a binary PPM");
  const int bytes = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(std::size_t(h.width) * std::size_t(h.height) * 3 * std::size_t(bytes));
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (in.gcount() != std::streamsize(buf.size())) throw std::runtime_error(path.string() + ": truncated PPM");
  RgbImage img(h.height, h.width);
  std::size_t p = 0;
  for (int r = 0; r < h.height; ++r)
    for (int c = 0; c < h.width; ++c)
      for (int k = 0; k < 3; ++k) {
        unsigned v = buf[p++];
        if (bytes == 2) v = (v << 8) | buf[p++];
        img.channel[std::size_t(k)](r, c) = float(v) / float(h.maxval);
      }
  return img;
}

void write_pgm16(const std::filesystem::path& path, const ImageF& image, double scale) {
  if (!(scale > 0)) throw std::invalid_argument("write_pgm16: scale must be positive");
  auto out = open_out(path, true);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n65535\n";
  std::vector<unsigned char> buf;
  buf.reserve(std::size_t(image.size()) * 2);
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const long v = std::clamp(std::lround(double(image(r, c)) / scale), 0l, 65535l);
      buf.push_back(static_cast<unsigned char>(v >> 8));
      buf.push_back(static_cast<unsigned char>(v & 0xff));
    }
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

ImageF read_pgm16(const std::filesystem::path& path, double scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const PnmHeader h = read_header(in);
  if (h.magic != "P5" || h.maxval <= 255) throw std::runtime_error(path.string() + ": not a 16-bit PGM");
  std::vector<unsigned char> buf(std::size_t(h.width) * std::size_t(h.height) * 2);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (in.gcount() != std::streamsize(buf.size())) throw std::runtime_error(path.string() + ": truncated PGM");
  ImageF img(h.height, h.width);
  for (std::size_t i = 0; i < std::size_t(img.size()); ++i)
    img.data()[i] = float(double((unsigned(buf[2 * i]) << 8) | buf[2 * i + 1]) * scale);
  return img;
}

void write_json(const std::filesystem::path& path, const Json& value) {
  auto out = open_out(path, false);
  out << value.dump(2) << '\n';
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::string>>& meta,
                     const std::vector<std::string>& header)
    : out_(open_out(path, false)), columns_(header.size()) {
  for (const auto& [k, v] : meta) out_ << "# " << k << ": " << v << '\n';
  row(header);
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
  return *this;
}

CsvWriter& CsvWriter::row(std::initializer_list<double> values) {
  std::vector<std::string> cells;
  for (double v : values) cells.push_back(format(v));
  return row(cells);
}

std::string CsvWriter::format(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Json to_json(const LinearFit& fit) {
  return Json{{"slope", fit.slope},         {"intercept", fit.intercept}, {"r_squared", fit.r_squared},
              {"n_points", fit.n_points},   {"range", {fit.x_min, fit.x_max}}};
}

Json to_json(const CalibrationModel& model) {
  return Json{{"normal", to_json(model.normal)},
              {"tangential", to_json(model.tangential)},
              {"config_hash", hash_hex(model.config_hash)}};
}

void write_mtf_csv(const std::filesystem::path& path, const MTFCurve& curve,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
  CsvWriter csv(path, meta, {"freq_lpmm", "mtf"});
  for (const auto& s : curve.samples) csv.row({s.freq_lp_per_mm, s.modulation});
}

}  // namespace mlat
