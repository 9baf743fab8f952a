#include "davrp/dataset_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace davrp {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("instance file: " + what);
}

std::string flags_of(const VariantSpec& v) {
    std::string f = "1";
    f += v.open_route ? '1' : '0';
    f += v.backhaul ? '1' : '0';
    f += v.duration_limit ? '1' : '0';
    f += v.time_window ? '1' : '0';
    return f;
}

}  // namespace

void write_instance(std::ostream& os, const Instance& inst) {
    const int n = inst.num_customers();
    os << std::setprecision(17);
    os << "vrp " << n << ' ' << inst.capacity << ' ' << flags_of(inst.variant) << '\n';
    for (int i = 0; i <= n; ++i) {
        os << i << ' ' << inst.xs[i] << ' ' << inst.ys[i] << ' ' << inst.demands[i];
        if (inst.variant.time_window)
            os << ' ' << inst.tw_start[i] << ' ' << inst.tw_end[i] << ' ' << inst.service[i];
        os << '\n';
    }
    if (inst.variant.duration_limit) os << "L " << inst.dist_limit << '\n';
}

Instance read_instance(std::istream& is) {
    std::string tag;
    if (!(is >> tag)) fail("missing header");
    if (tag != "vrp") fail("expected 'vrp' header, got '" + tag + "'");
    Instance inst;
    int n = 0;
    std::string flags;
    if (!(is >> n >> inst.capacity >> flags)) fail("bad header line");
    if (n < 0 || inst.capacity <= 0) fail("non-positive size or capacity");
    if (flags.size() != 5 || flags[0] != '1') fail("bad variant flags '" + flags + "'");
    for (char c : flags)
        if (c != '0' && c != '1') fail("bad variant flags '" + flags + "'");
    inst.variant.open_route = flags[1] == '1';
    inst.variant.backhaul = flags[2] == '1';
    inst.variant.duration_limit = flags[3] == '1';
    inst.variant.time_window = flags[4] == '1';

    inst.xs.resize(n + 1);
    inst.ys.resize(n + 1);
    inst.demands.resize(n + 1);
    if (inst.variant.time_window) {
        inst.tw_start.resize(n + 1);
        inst.tw_end.resize(n + 1);
        inst.service.resize(n + 1);
    }
    for (int i = 0; i <= n; ++i) {
        int idx;
        if (!(is >> idx)) fail("truncated at node " + std::to_string(i));
        if (idx != i) fail("node lines out of order at " + std::to_string(i));
        if (!(is >> inst.xs[i] >> inst.ys[i] >> inst.demands[i]))
            fail("bad node line " + std::to_string(i));
        if (inst.variant.time_window &&
            !(is >> inst.tw_start[i] >> inst.tw_end[i] >> inst.service[i]))
            fail("bad window fields at node " + std::to_string(i));
    }
    if (inst.demands[0] != 0) fail("depot demand must be zero");
    if (inst.variant.duration_limit) {
        std::string l;
        if (!(is >> l) || l != "L") fail("missing distance limit line");
        if (!(is >> inst.dist_limit)) fail("bad distance limit value");
    }
    return inst;
}

std::vector<Instance> read_instances(std::istream& is) {
    std::vector<Instance> out;
    while (true) {
        is >> std::ws;
        if (is.peek() == std::char_traits<char>::eof()) break;
        out.push_back(read_instance(is));
    }
    return out;
}

void write_instance_file(const std::string& path, const Instance& inst) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail("cannot open " + path);
    write_instance(os, inst);
    if (!os) fail("write failed for " + path);
}

Instance read_instance_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open " + path);
    return read_instance(is);
}

std::vector<Instance> read_instances_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open " + path);
    return read_instances(is);
}

void write_solution(std::ostream& os, const Solution& sol) {
    os << std::setprecision(17);
    os << "cost " << sol.cost << "\nseq";
    for (int v : sol.sequence) os << ' ' << v;
    os << '\n';
}

SolutionFileData read_solution(std::istream& is) {
    SolutionFileData s;
    std::string tag;
    if (!(is >> tag) || tag != "cost") throw std::runtime_error("solution file: missing cost");
    if (!(is >> s.cost)) throw std::runtime_error("solution file: bad cost value");
    if (!(is >> tag) || tag != "seq") throw std::runtime_error("solution file: missing seq");
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    int v;
    while (ls >> v) s.sequence.push_back(v);
    if (s.sequence.empty()) throw std::runtime_error("solution file: empty sequence");
    return s;
}

void write_solution_file(const std::string& path, const Solution& sol) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("solution file: cannot open " + path);
    write_solution(os, sol);
}

SolutionFileData read_solution_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("solution file: cannot open " + path);
    return read_solution(is);
}

}  // namespace davrp
