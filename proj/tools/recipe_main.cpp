#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "gfv/recipes.hpp"

namespace {

constexpr const char* kUsage =
    "usage: gfv-recipe <e2e-small|ablation-pmax|grid-vs-frame> --out DIR [--seed N]";

}  // namespace

int main(int argc, char** argv) {
  std::string name, out;
  uint64_t seed = 0;
  const std::vector<std::string> args(argv + 1, argv + argc);
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--help" || a == "-h") {
      std::printf("%s\n\nRuns one experiment recipe end to end, writing every "
                  "artifact and a\ncheck summary under --out.\n", kUsage);
      return 0;
    }
    if (a == "--out" || a == "--seed") {
      if (i + 1 >= args.size()) {
        std::fprintf(stderr, "%s -- %s needs a value\n", kUsage, a.c_str());
        return 1;
      }
      const std::string& v = args[++i];
      if (a == "--out") {
        out = v;
      } else {
        try {
          seed = std::stoull(v);
        } catch (const std::exception&) {
          std::fprintf(stderr, "%s -- --seed wants an integer, got '%s'\n", kUsage,
                       v.c_str());
          return 1;
        }
      }
    } else if (!a.empty() && a[0] == '-') {
      std::fprintf(stderr, "%s -- unknown option '%s'\n", kUsage, a.c_str());
      return 1;
    } else if (name.empty()) {
      name = a;
    } else {
      std::fprintf(stderr, "%s -- unexpected argument '%s'\n", kUsage, a.c_str());
      return 1;
    }
  }
  if (name.empty() || out.empty()) {
    std::fprintf(stderr, "%s\n", kUsage);
    return 1;
  }
  return gfv::run_recipe(name, out, seed);
}
