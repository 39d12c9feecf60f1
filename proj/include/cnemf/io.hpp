#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cnemf {

/// Creates the directory (and parents) if missing; throws on failure.
void ensure_directory(const std::string& path);

/// Write-temp-then-rename so readers never observe a partial file; reruns
/// overwrite in place.  Throws std::runtime_error on I/O failure.
void write_text_atomic(const std::string& path, const std::string& content);

/// Round-trippable decimal rendering (17 significant digits).
std::string format_double(double x);

/// One CSV record; fields are joined with commas (values here never need
/// quoting: numbers, hashes, and bare identifiers only).
std::string csv_line(const std::vector<std::string>& fields);

/// Comment preamble embedded in every CSV output: config hash and root seed.
std::string provenance_header(const std::string& config_hash, std::uint64_t seed);

/// Full CSV document: provenance comments, header record, data records.
std::string csv_document(const std::string& config_hash, std::uint64_t seed,
                         const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

}  // namespace cnemf
