#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cilab/linalg.hpp"

namespace cilab {
namespace textio {

// printf %.Ng formatting; sig = significant digits. 17 round-trips a
// double exactly, 12 is the reporting precision for result tables.
std::string format_real(double v, int sig);

std::string trim(const std::string& s);

// Flat `key = value` file. '#' starts a comment, blank lines are skipped.
// Returns pairs in file order; duplicate keys are kept (caller decides).
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path);
std::vector<std::pair<std::string, std::string>> parse_kv_text(
    const std::string& text, const std::string& origin);

// Strict numeric parses; throw ConfigError naming `what` on junk.
double parse_real(const std::string& s, const std::string& what);
long long parse_int(const std::string& s, const std::string& what);
std::uint64_t parse_u64(const std::string& s, const std::string& what);
bool parse_bool(const std::string& s, const std::string& what);
std::vector<double> parse_real_list(const std::string& s,
                                    const std::string& what);
std::vector<int> parse_int_list(const std::string& s, const std::string& what);

// Sample-block CSV: header dim_0,...,dim_{k-1}; one sample (matrix column)
// per CSV row; cells carry full double precision.
void write_block_csv(const Matrix& block, const std::filesystem::path& path);
Matrix read_block_csv(const std::filesystem::path& path);

}  // namespace textio
}  // namespace cilab
