#pragma once

#include "mlat/image.hpp"
#include "mlat/metrology.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace mlat {

using Json = nlohmann::json;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hash_hex(std::uint64_t h);

/// Binary PPM (P6). bit_depth 8 or 16; values are clamped to [0, 1].
void write_ppm(const std::filesystem::path& path, const RgbImage& image, int bit_depth = 8);
RgbImage read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5), 16 bit, value = round(v / scale), clamped to [0, 65535].
void write_pgm16(const std::filesystem::path& path, const ImageF& image, double scale);
ImageF read_pgm16(const std::filesystem::path& path, double scale);

void write_json(const std::filesystem::path& path, const Json& value);

/// CSV with `# key: value` metadata lines ahead of the header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& meta,
            const std::vector<std::string>& header);

  CsvWriter& row(const std::vector<std::string>& cells);
  CsvWriter& row(std::initializer_list<double> values);

  static std::string format(double v);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

Json to_json(const LinearFit& fit);
Json to_json(const CalibrationModel& model);
void write_mtf_csv(const std::filesystem::path& path, const MTFCurve& curve,
                   const std::vector<std::pair<std::string, std::string>>& meta);

}  // namespace mlat
