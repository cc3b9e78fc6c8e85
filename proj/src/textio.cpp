#include "cilab/textio.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cilab/errors.hpp"

namespace cilab {
namespace textio {

std::string format_real(double v, int sig) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig, v);
  return buf;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

std::vector<std::pair<std::string, std::string>> parse_kv_text(
    const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str(), path.filename().string());
}

double parse_real(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) throw ConfigError(what + ": empty value");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(what + ": bad real '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) throw ConfigError(what + ": empty value");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(what + ": bad integer '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) throw ConfigError(what + ": empty value");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE || t[0] == '-') {
    throw ConfigError(what + ": bad unsigned integer '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(what + ": bad boolean '" + s + "'");
}

template <typename T, typename F>
static std::vector<T> parse_list(const std::string& s, const std::string& what,
                                 F parse_one) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    out.push_back(parse_one(item, what));
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::vector<double> parse_real_list(const std::string& s,
                                    const std::string& what) {
  return parse_list<double>(s, what, parse_real);
}

std::vector<int> parse_int_list(const std::string& s,
                                const std::string& what) {
  return parse_list<int>(s, what, [](const std::string& x,
                                     const std::string& w) {
    return static_cast<int>(parse_int(x, w));
  });
}

void write_block_csv(const Matrix& block, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    out << (i ? "," : "") << "dim_" << i;
  }
  out << "\n";
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      out << (i ? "," : "") << format_real(block(i, j), 17);
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix read_block_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  Eigen::Index dims = 1;
  for (char c : line) {
    if (c == ',') ++dims;
  }
  std::vector<double> cells;
  Eigen::Index rows_read = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index got = 0;
    while (std::getline(ls, cell, ',')) {
      cells.push_back(parse_real(cell, path.string()));
      ++got;
    }
    if (got != dims) {
      throw IoError(path.string() + ": row " + std::to_string(rows_read + 2) +
                    " has " + std::to_string(got) + " cells, expected " +
                    std::to_string(dims));
    }
    ++rows_read;
  }
  if (rows_read == 0) throw IoError(path.string() + ": no data rows");
  Matrix block(dims, rows_read);
  for (Eigen::Index j = 0; j < rows_read; ++j) {
    for (Eigen::Index i = 0; i < dims; ++i) {
      block(i, j) = cells[static_cast<std::size_t>(j * dims + i)];
    }
  }
  return block;
}

}  // namespace textio
}  // namespace cilab
