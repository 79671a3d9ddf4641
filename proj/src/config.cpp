#include "ingram/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "ingram/errors.hpp"

namespace ingram {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    int v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw ConfigError("bad integer for '" + key + "': " + value);
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || value.empty())
        throw ConfigError("bad number for '" + key + "': " + value);
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("bad boolean for '" + key + "': " + value);
}

}  // namespace

void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value) {
    HyperParams& hp = config.hp;
    if (key == "rel_dim")
        hp.rel_dim = parse_int(key, value);
    else if (key == "ent_dim")
        hp.ent_dim = parse_int(key, value);
    else if (key == "rel_hidden")
        hp.rel_hidden = parse_int(key, value);
    else if (key == "ent_hidden")
        hp.ent_hidden = parse_int(key, value);
    else if (key == "rel_layers")
        hp.rel_layers = parse_int(key, value);
    else if (key == "ent_layers")
        hp.ent_layers = parse_int(key, value);
    else if (key == "rel_heads")
        hp.rel_heads = parse_int(key, value);
    else if (key == "ent_heads")
        hp.ent_heads = parse_int(key, value);
    else if (key == "bins")
        hp.num_bins = parse_int(key, value);
    else if (key == "margin")
        hp.margin = parse_double(key, value);
    else if (key == "aggregator") {
        if (value == "attention")
            hp.aggregator = Aggregator::attention;
        else if (value == "mean")
            hp.aggregator = Aggregator::mean;
        else if (value == "sum")
            hp.aggregator = Aggregator::sum;
        else
            throw ConfigError("bad aggregator: " + value);
    } else if (key == "self_loop") {
        if (value == "mean_relation")
            hp.self_loop = SelfLoop::mean_relation;
        else if (value == "learned_vector")
            hp.self_loop = SelfLoop::learned_vector;
        else
            throw ConfigError("bad self_loop: " + value);
    } else if (key == "relation_update")
        hp.relation_update = parse_bool(key, value);
    else if (key == "dynamic_split")
        config.dynamic_split = parse_bool(key, value);
    else if (key == "epochs")
        config.epochs = parse_int(key, value);
    else if (key == "validate_every")
        config.validate_every = parse_int(key, value);
    else if (key == "negatives")
        config.negatives = parse_int(key, value);
    else if (key == "batch_size")
        config.batch_size = parse_int(key, value);
    else if (key == "learning_rate")
        config.learning_rate = parse_double(key, value);
    else if (key == "seed")
        config.seed = std::strtoull(value.c_str(), nullptr, 10);
    else
        throw ConfigError("unknown config key: " + key);
}

TrainConfig parse_train_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    TrainConfig config;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        apply_config_entry(config, trim(stripped.substr(0, eq)),
                           trim(stripped.substr(eq + 1)));
    }
    config.validate();
    return config;
}

}  // namespace ingram
