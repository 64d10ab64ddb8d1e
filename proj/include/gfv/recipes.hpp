#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gfv {

// Built-in experiment recipes, each an ordered list of `gfv` invocations with
// artifact and threshold checks.
std::vector<std::string> recipe_names();

// Runs a named recipe under out_dir: executes every invocation in order,
// verifies artifacts and thresholds, writes out_dir/summary.tsv and prints
// it. Returns 0 when every check passes, 1 for an unknown recipe, 2 when a
// step or check fails (the failed criteria are listed on stderr). Recipes
// write only under out_dir.
int run_recipe(const std::string& name, const std::string& out_dir, uint64_t seed);

}  // namespace gfv
