#pragma once

// Shared test scaffolding: fixture paths and throwaway directories.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#ifndef DSTCONF_SOURCE_DIR
#define DSTCONF_SOURCE_DIR "."
#endif

namespace testutil {

inline std::string fixture(const std::string& name) {
  return std::string(DSTCONF_SOURCE_DIR) + "/tests/fixtures/" + name;
}

inline std::string template_dir() { return std::string(DSTCONF_SOURCE_DIR) + "/templates"; }

/// Unique directory under the system temp root, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::random_device rd;
    std::uniform_int_distribution<unsigned long long> dist;
    path = std::filesystem::temp_directory_path() /
           ("dstconf_test_" + std::to_string(dist(rd)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    const std::string p = file(name);
    std::ofstream out(p, std::ios::trunc | std::ios::binary);
    out << content;
    return p;
  }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
