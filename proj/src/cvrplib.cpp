#include "davrp/cvrplib.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace davrp {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("cvrplib: " + what);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

CvrplibInstance parse_cvrplib(std::istream& is) {
    CvrplibInstance inst;
    std::string edge_type;
    bool have_coords = false, have_demands = false;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line == "EOF") break;

        const auto colon = line.find(':');
        std::string key = trim(colon == std::string::npos ? line : line.substr(0, colon));
        std::string val = colon == std::string::npos ? "" : trim(line.substr(colon + 1));

        if (key == "NAME") inst.name = val;
        else if (key == "DIMENSION") inst.dimension = std::stoi(val);
        else if (key == "CAPACITY") inst.capacity = std::stoi(val);
        else if (key == "EDGE_WEIGHT_TYPE") edge_type = val;
        else if (key == "TYPE" || key == "COMMENT" || key == "BEST_KNOWN") continue;
        else if (key == "NODE_COORD_SECTION") {
            if (inst.dimension <= 0) fail("NODE_COORD_SECTION before DIMENSION");
            inst.xs.assign(inst.dimension, 0.0);
            inst.ys.assign(inst.dimension, 0.0);
            for (int i = 0; i < inst.dimension; ++i) {
                int id;
                double x, y;
                if (!(is >> id >> x >> y)) fail("truncated NODE_COORD_SECTION");
                if (id < 1 || id > inst.dimension) fail("node id out of range");
                inst.xs[id - 1] = x;
                inst.ys[id - 1] = y;
            }
            std::getline(is, line);  // consume the rest of the last coord line
            have_coords = true;
        } else if (key == "DEMAND_SECTION") {
            if (inst.dimension <= 0) fail("DEMAND_SECTION before DIMENSION");
            inst.demands.assign(inst.dimension, 0);
            for (int i = 0; i < inst.dimension; ++i) {
                int id, d;
                if (!(is >> id >> d)) fail("truncated DEMAND_SECTION");
                if (id < 1 || id > inst.dimension) fail("demand id out of range");
                inst.demands[id - 1] = d;
            }
            std::getline(is, line);
            have_demands = true;
        } else if (key == "DEPOT_SECTION") {
            int id;
            if (!(is >> id)) fail("truncated DEPOT_SECTION");
            if (id >= 1) inst.depot = id - 1;
            while (is >> id && id != -1) fail("multiple depots are not supported");
            std::getline(is, line);
        }
        // other keys are ignored
    }
    if (inst.dimension <= 0) fail("missing DIMENSION");
    if (inst.capacity <= 0) fail("missing CAPACITY");
    if (!edge_type.empty() && edge_type != "EUC_2D")
        fail("unsupported EDGE_WEIGHT_TYPE " + edge_type);
    if (!have_coords) fail("missing NODE_COORD_SECTION");
    if (!have_demands) fail("missing DEMAND_SECTION");
    if (inst.depot < 0 || inst.depot >= inst.dimension) fail("depot out of range");
    if (inst.demands[inst.depot] != 0) fail("depot demand must be zero");
    return inst;
}

CvrplibInstance parse_cvrplib_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open " + path);
    return parse_cvrplib(is);
}

CvrplibProblem to_unit_problem(const CvrplibInstance& raw) {
    CvrplibProblem cp;
    cp.raw = raw;
    const int dim = raw.dimension;

    cp.ids.push_back(raw.depot);
    for (int i = 0; i < dim; ++i)
        if (i != raw.depot) cp.ids.push_back(i);

    double min_x = raw.xs[0], max_x = raw.xs[0], min_y = raw.ys[0], max_y = raw.ys[0];
    for (int i = 1; i < dim; ++i) {
        min_x = std::min(min_x, raw.xs[i]);
        max_x = std::max(max_x, raw.xs[i]);
        min_y = std::min(min_y, raw.ys[i]);
        max_y = std::max(max_y, raw.ys[i]);
    }
    const double span = std::max(max_x - min_x, max_y - min_y);
    if (span <= 0.0) fail("degenerate coordinates: all nodes coincide");

    Instance& u = cp.unit;
    u.variant = VariantSpec{};  // capacity only
    u.capacity = raw.capacity;
    u.xs.resize(dim);
    u.ys.resize(dim);
    u.demands.resize(dim);
    for (int k = 0; k < dim; ++k) {
        const int src = cp.ids[k];
        u.xs[k] = (raw.xs[src] - min_x) / span;
        u.ys[k] = (raw.ys[src] - min_y) / span;
        u.demands[k] = raw.demands[src];
    }
    for (int k = 1; k < dim; ++k)
        if (u.demands[k] > raw.capacity) fail("customer demand exceeds vehicle capacity");
    return cp;
}

long long rounded_cost(const CvrplibProblem& cp, const std::vector<int>& unit_seq) {
    long long total = 0;
    for (std::size_t t = 0; t + 1 < unit_seq.size(); ++t) {
        const int a = cp.ids.at(unit_seq[t]);
        const int b = cp.ids.at(unit_seq[t + 1]);
        const double d = std::hypot(cp.raw.xs[a] - cp.raw.xs[b], cp.raw.ys[a] - cp.raw.ys[b]);
        total += std::llround(d);
    }
    return total;
}

std::map<std::string, double> read_best_known(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open best-known file " + path);
    std::map<std::string, double> out;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail("best-known line without comma: " + line);
        const std::string name = trim(line.substr(0, comma));
        const std::string val = trim(line.substr(comma + 1));
        if (name == "name" || name == "instance") continue;  // header
        try {
            out[name] = std::stod(val);
        } catch (const std::exception&) {
            fail("bad best-known value for " + name);
        }
    }
    return out;
}

}  // namespace davrp
