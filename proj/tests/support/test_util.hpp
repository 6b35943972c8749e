// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sawtopics/rng.hpp"
#include "sawtopics/types.hpp"

namespace sawtest {

inline sawtopics::Mat<double> uniform_matrix(sawtopics::Rng& rng, sawtopics::Index rows,
                                             sawtopics::Index cols, double lo, double hi) {
  sawtopics::Mat<double> m(rows, cols);
  for (sawtopics::Index i = 0; i < rows; ++i) {
    for (sawtopics::Index j = 0; j < cols; ++j) {
      m(i, j) = lo + (hi - lo) * rng.uniform01();
    }
  }
  return m;
}

inline sawtopics::Mat<double> normal_matrix(sawtopics::Rng& rng, sawtopics::Index rows,
                                            sawtopics::Index cols, double stddev) {
  sawtopics::Mat<double> m(rows, cols);
  for (sawtopics::Index i = 0; i < rows; ++i) {
    for (sawtopics::Index j = 0; j < cols; ++j) {
      m(i, j) = stddev * rng.normal();
    }
  }
  return m;
}

// Keeps every entry at least `margin` away from `knot` so finite differences
// do not straddle a kink.
inline void nudge_away_from(sawtopics::Mat<double>& m, double knot, double margin) {
  for (sawtopics::Index i = 0; i < m.rows(); ++i) {
    for (sawtopics::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - knot) < margin) m(i, j) = knot + 2.0 * margin;
    }
  }
}

// Scratch directory under the build tree, wiped on construction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("sawtopics_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
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
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace sawtest
