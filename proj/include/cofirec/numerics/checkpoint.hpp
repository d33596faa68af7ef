#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cofirec/numerics/matrix.hpp"

// Self-describing text checkpoints:
//
//   cofirec-checkpoint 1 <count>
//   <name> <rows> <cols>
//   <row 0 values>
//   ...
//
// Values use the shortest representation that round-trips exactly.
namespace cofirec::numerics {

void write_checkpoint(std::ostream& out, const std::vector<const Param*>& params);
void save_checkpoint(const std::string& path, const std::vector<const Param*>& params);

// Loads values into `params` by name. Every param must be present with a
// matching shape; extra entries in the file are an error too.
void read_checkpoint(std::istream& in, const std::vector<Param*>& params);
void load_checkpoint(const std::string& path, const std::vector<Param*>& params);

std::vector<const Param*> as_const(const std::vector<Param*>& params);

}  // namespace cofirec::numerics
