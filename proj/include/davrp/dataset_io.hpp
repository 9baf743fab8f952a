#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "davrp/env.hpp"

namespace davrp {

// Plain-text instance format (numbers carry 17 significant digits so values
// round-trip bit-exactly):
//   vrp <n> <capacity> <flags>        flags = 5 chars [C,O,B,L,TW], C always 1
//   <idx> <x> <y> <demand> [<start> <end> <service>]   for idx = 0..n
//   L <limit>                          only with the L flag
void write_instance(std::ostream& os, const Instance& inst);
Instance read_instance(std::istream& is);

void write_instance_file(const std::string& path, const Instance& inst);
Instance read_instance_file(const std::string& path);

// Reads instances until EOF (files may hold several back to back).
std::vector<Instance> read_instances(std::istream& is);
std::vector<Instance> read_instances_file(const std::string& path);

// Solution format:
//   cost <value>
//   seq <i0> <i1> ... <ik>
struct SolutionFileData {
    double cost = 0.0;
    std::vector<int> sequence;
};
void write_solution(std::ostream& os, const Solution& sol);
SolutionFileData read_solution(std::istream& is);
void write_solution_file(const std::string& path, const Solution& sol);
SolutionFileData read_solution_file(const std::string& path);

}  // namespace davrp
