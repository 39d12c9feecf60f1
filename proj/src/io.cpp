#include "cnemf/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace cnemf {

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec && !std::filesystem::is_directory(path))
    throw std::runtime_error("io: cannot create directory \"" + path + "\": " + ec.message());
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("io: cannot open \"" + tmp + "\" for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("io: write to \"" + tmp + "\" failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("io: cannot rename \"" + tmp + "\" to \"" + path + "\": " + ec.message());
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  out += '\n';
  return out;
}

std::string provenance_header(const std::string& config_hash, std::uint64_t seed) {
  return "# config_hash=" + config_hash + "\n# seed=" + std::to_string(seed) + "\n";
}

std::string csv_document(const std::string& config_hash, std::uint64_t seed,
                         const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::string out = provenance_header(config_hash, seed);
  out += csv_line(header);
  for (const std::vector<std::string>& r : rows) out += csv_line(r);
  return out;
}

}  // namespace cnemf
