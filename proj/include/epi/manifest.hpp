#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

namespace epi {

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("sha256: cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha256: context allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int j = 0; j < len; ++j) {
    out.push_back(hex[digest[j] >> 4]);
    out.push_back(hex[digest[j] & 0xf]);
  }
  return out;
}

// Everything needed to reproduce a run bit-identically: the command, the full
// resolved configuration, the master seed, and digests of the files read and
// written. The timestamp is informational and not part of the reproducibility
// contract.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::vector<std::pair<std::string, std::string>> inputs;   // (path, sha256)
  std::vector<std::pair<std::string, std::string>> outputs;  // (path, sha256)
  std::string created_utc;

  void add_input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }
  void add_output(const std::string& path) { outputs.emplace_back(path, sha256_file(path)); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["manifest_version"] = 1;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& [path, digest] : v) arr.push_back({{"path", path}, {"sha256", digest}});
      return arr;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    j["created_utc"] = created_utc;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("manifest: cannot open " + path);
    os << to_json().dump(1) << '\n';
  }
};

}  // namespace epi
