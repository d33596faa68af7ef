#include "cofirec/numerics/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cofirec/io.hpp"

namespace cofirec::numerics {
namespace {
constexpr std::string_view kMagic = "cofirec-checkpoint";
}

void write_checkpoint(std::ostream& out, const std::vector<const Param*>& params) {
  out << kMagic << " 1 " << params.size() << '\n';
  for (const Param* p : params) {
    out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (std::size_t r = 0; r < p->value.rows(); ++r) {
      out << io::join_doubles(p->value.row(r)) << '\n';
    }
  }
}

void save_checkpoint(const std::string& path, const std::vector<const Param*>& params) {
  std::ostringstream out;
  write_checkpoint(out, params);
  io::write_file(path, out.str());
}

void read_checkpoint(std::istream& in, const std::vector<Param*>& params) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != kMagic || version != 1) {
    throw std::runtime_error("checkpoint: bad header");
  }
  std::map<std::string, Param*> by_name;
  for (Param* p : params) {
    by_name[p->name] = p;
  }
  if (count != params.size()) {
    throw std::runtime_error("checkpoint: holds " + std::to_string(count) + " params, model has " +
                             std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    if (!(in >> name >> rows >> cols)) {
      throw std::runtime_error("checkpoint: truncated at entry " + std::to_string(i));
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint: unknown param " + name);
    }
    Param& p = *it->second;
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw std::runtime_error("checkpoint: shape of " + name + " is " + std::to_string(rows) +
                               "x" + std::to_string(cols) + ", model expects " +
                               shape_string(p.value));
    }
    std::string token;
    for (double& v : p.value.values()) {
      if (!(in >> token)) {
        throw std::runtime_error("checkpoint: truncated values for " + name);
      }
      v = io::parse_double(token);
    }
    by_name.erase(it);
  }
}

void load_checkpoint(const std::string& path, const std::vector<Param*>& params) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open " + path);
  }
  read_checkpoint(in, params);
}

std::vector<const Param*> as_const(const std::vector<Param*>& params) {
  return {params.begin(), params.end()};
}

}  // namespace cofirec::numerics
