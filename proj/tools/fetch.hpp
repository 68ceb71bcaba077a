#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rkopt::fetch {

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RemoteFile {
  std::string name;
  std::string md5;  // lowercase hex
};

struct DatasetSource {
  std::string base_url;  // scheme://host[:port]/path/
  std::vector<RemoteFile> files;
};

/// Standard archive locations and checksums for "mnist" or "fashion_mnist".
DatasetSource source_for(const std::string& dataset);

std::string md5_hex(const std::string& bytes);
std::string md5_file(const std::filesystem::path& path);

/// Downloads every file of `source` into `dir`. Files already present with the
/// right checksum are kept. A checksum mismatch after download raises
/// FetchError and leaves no file behind.
void fetch_dataset(const DatasetSource& source, const std::filesystem::path& dir, std::ostream& log);

}  // namespace rkopt::fetch
