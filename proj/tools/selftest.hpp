#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace layerscatter::selftest {

enum class Level { Fast, Full };

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Fast runs criteria 1, 2, 3, 4 and 8; full runs all eight. `only` restricts
// the set further. One line per criterion is written to `out`.
std::vector<CheckResult> run(Level level, const std::filesystem::path& scene_dir, std::ostream& out,
                             const std::vector<int>& only = {});

}  // namespace layerscatter::selftest
