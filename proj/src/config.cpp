#include "davrp/config.hpp"

#include <fstream>
#include <sstream>

namespace davrp {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, val] : kv) {
        try {
            if (key == "n") cfg.n = std::stoi(val);
            else if (key == "capacity") cfg.capacity_override = std::stoi(val);
            else if (key == "batch") cfg.batch = std::stoi(val);
            else if (key == "instances_per_epoch") cfg.instances_per_epoch = std::stoi(val);
            else if (key == "epochs") cfg.epochs = std::stoi(val);
            else if (key == "n_starts") cfg.n_starts = std::stoi(val);
            else if (key == "lr") cfg.lr = std::stod(val);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
            else if (key == "clip_norm") cfg.clip_norm = std::stod(val);
            else if (key == "lr_gamma") cfg.lr_gamma = std::stod(val);
            else if (key == "val_instances") cfg.val_instances = std::stoi(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "out_dir") cfg.out_dir = val;
            else if (key == "tasks") cfg.tasks = split_list(val);
            else if (key == "milestones") {
                cfg.milestones.clear();
                for (const std::string& m : split_list(val)) cfg.milestones.push_back(std::stoi(m));
            }
            else if (key == "d_h") cfg.model.d_h = std::stoi(val);
            else if (key == "n_heads") cfg.model.n_heads = std::stoi(val);
            else if (key == "n_layers") cfg.model.n_layers = std::stoi(val);
            else if (key == "d_ff") cfg.model.d_ff = std::stoi(val);
            else if (key == "d_prompt") cfg.model.d_prompt = std::stoi(val);
            else if (key == "clip") cfg.model.clip = std::stod(val);
            else if (key == "top_k") cfg.model.top_k = std::stoi(val);
            else if (key == "sparse_fn") cfg.model.sparse_fn = sparse_fn_from(val);
            else if (key == "topk_style") cfg.model.topk_style = topk_style_from(val);
            else if (key == "prompt_pos") cfg.model.prompt_pos = prompt_pos_from(val);
            else if (key == "use_prompt") cfg.model.use_prompt = val != "0";
            else if (key == "use_sparse") cfg.model.use_sparse = val != "0";
            else throw std::runtime_error("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config key '" + key + "': bad value '" + val + "'");
        }
    }
}

}  // namespace davrp
