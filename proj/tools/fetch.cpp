#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "fetch.hpp"

#include "httplib.h"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>

namespace rkopt::fetch {

DatasetSource source_for(const std::string& dataset) {
  if (dataset == "mnist") {
    return {"https://ossci-datasets.s3.amazonaws.com/mnist/",
            {{"train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
             {"train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"},
             {"t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"},
             {"t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"}}};
  }
  if (dataset == "fashion_mnist") {
    return {"https://raw.githubusercontent.com/zalandoresearch/fashion-mnist/master/data/fashion/",
            {{"train-images-idx3-ubyte.gz", "8d4fb7e6c68d591d4c3dfef9ec88bf0d"},
             {"train-labels-idx1-ubyte.gz", "25c81989df183df01b3e8a0aad5dffbe"},
             {"t10k-images-idx3-ubyte.gz", "bef4ecab320f06d8554ea6380940ec79"},
             {"t10k-labels-idx1-ubyte.gz", "bb300cfdad3c16e7a12a480ee83cd310"}}};
  }
  throw FetchError("unknown dataset '" + dataset + "' (expected mnist or fashion_mnist)");
}

std::string md5_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_md5(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw FetchError("MD5 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string md5_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FetchError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return md5_hex(ss.str());
}

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw FetchError("malformed URL " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string download(const std::string& url) {
  const Url u = split_url(url);
  httplib::Client client(u.origin);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  auto res = client.Get(u.path);
  if (!res) throw FetchError("GET " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw FetchError("GET " + url + " returned HTTP " + std::to_string(res->status));
  return std::move(res->body);
}

}  // namespace

void fetch_dataset(const DatasetSource& source, const std::filesystem::path& dir, std::ostream& log) {
  std::filesystem::create_directories(dir);
  for (const auto& f : source.files) {
    const auto target = dir / f.name;
    if (std::filesystem::exists(target) && md5_file(target) == f.md5) {
      log << "ok      " << target.string() << '\n';
      continue;
    }
    const std::string url = source.base_url + f.name;
    log << "fetch   " << url << '\n';
    const std::string body = download(url);
    const std::string got = md5_hex(body);
    if (got != f.md5) throw FetchError("checksum mismatch for " + f.name + ": expected " + f.md5 + ", got " + got);
    const auto tmp = dir / (f.name + ".part");
    {
      std::ofstream out(tmp, std::ios::binary);
      out.write(body.data(), static_cast<std::streamsize>(body.size()));
      if (!out) throw FetchError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
    log << "saved   " << target.string() << '\n';
  }
}

}  // namespace rkopt::fetch
