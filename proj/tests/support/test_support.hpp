#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("clinctx-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string source_dir() { return CLINCTX_SOURCE_DIR; }

// ---- oracles ---------------------------------------------------------------
// Written from the definitions, independently of the library code.

// Code points of a UTF-8 string as separate strings.
inline std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

struct SliceChunk {
  std::size_t offset;
  std::string text;
};

// Brute force: slice [k*stride, k*stride+size) for every k until the window
// reaches the end of the text.
inline std::vector<SliceChunk> slice_oracle(const std::string& text, std::size_t size, std::size_t overlap) {
  auto chars = utf8_chars(text);
  std::vector<SliceChunk> out;
  if (chars.empty()) return out;
  std::size_t stride = size - overlap;
  for (std::size_t start = 0;; start += stride) {
    std::size_t end = std::min(start + size, chars.size());
    std::string piece;
    for (std::size_t i = start; i < end; ++i) piece += chars[i];
    out.push_back({start, piece});
    if (end == chars.size()) break;
  }
  return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::string random_text(std::mt19937_64& rng, std::size_t length, bool unicode) {
  static const std::vector<std::string> pool = {"a", "b", "c", " ", "\n", ".", "x", "y", "z", "0"};
  static const std::vector<std::string> wide = {"\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x98\x80"};
  std::string s;
  for (std::size_t i = 0; i < length; ++i) {
    if (unicode && rng() % 10 == 0) s += wide[rng() % wide.size()];
    else s += pool[rng() % pool.size()];
  }
  return s;
}

}  // namespace testsupport
