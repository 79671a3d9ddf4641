#include "ingram/checkpoint.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include "ingram/errors.hpp"

namespace ingram {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'G', 'R', 'A', 'M', '0', '1'};

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void put_u32(std::string& out, uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(char((x >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, uint32_t(s.size()));
    out.append(s);
}

void put_f64(std::string& out, double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& data, size_t end) : data_(data), end_(end) {}

    uint32_t u32() {
        need(4);
        uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= uint32_t(uint8_t(data_[pos_ + size_t(i)])) << (8 * i);
        pos_ += 4;
        return x;
    }
    double f64() {
        need(8);
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= uint64_t(uint8_t(data_[pos_ + size_t(i)])) << (8 * i);
        pos_ += 8;
        double x;
        std::memcpy(&x, &bits, sizeof x);
        return x;
    }
    std::string str() {
        const uint32_t len = u32();
        need(len);
        std::string s = data_.substr(pos_, len);
        pos_ += len;
        return s;
    }
    bool exhausted() const { return pos_ == end_; }

private:
    void need(size_t k) const {
        if (pos_ + k > end_)
            throw CheckpointError(CheckpointError::Kind::bad_header, "checkpoint truncated");
    }
    const std::string& data_;
    size_t end_;
    size_t pos_ = sizeof kMagic;
};

const char* aggregator_name(Aggregator a) {
    switch (a) {
        case Aggregator::attention: return "attention";
        case Aggregator::mean: return "mean";
        case Aggregator::sum: return "sum";
    }
    return "?";
}

const char* self_loop_name(SelfLoop s) {
    return s == SelfLoop::mean_relation ? "mean_relation" : "learned_vector";
}

}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const ModelParameters& params, const std::filesystem::path& path) {
    std::string buf(kMagic, sizeof kMagic);

    const HyperParams& hp = params.hp;
    const std::vector<std::pair<std::string, std::string>> header = {
        {"rel_dim", std::to_string(hp.rel_dim)},
        {"ent_dim", std::to_string(hp.ent_dim)},
        {"rel_hidden", std::to_string(hp.rel_hidden)},
        {"ent_hidden", std::to_string(hp.ent_hidden)},
        {"rel_layers", std::to_string(hp.rel_layers)},
        {"ent_layers", std::to_string(hp.ent_layers)},
        {"rel_heads", std::to_string(hp.rel_heads)},
        {"ent_heads", std::to_string(hp.ent_heads)},
        {"bins", std::to_string(hp.num_bins)},
        {"margin", format_double(hp.margin)},
        {"seed", std::to_string(params.train_seed)},
        {"aggregator", aggregator_name(hp.aggregator)},
        {"self_loop", self_loop_name(hp.self_loop)},
        {"relation_update", hp.relation_update ? "true" : "false"},
    };
    put_u32(buf, uint32_t(header.size()));
    for (const auto& [k, v] : header) {
        put_string(buf, k);
        put_string(buf, v);
    }

    params.for_each_parameter([&buf](const std::string&, const Tensor& t) {
        put_u32(buf, uint32_t(t.rows));
        put_u32(buf, uint32_t(t.cols));
        for (double x : t.v) put_f64(buf, x);
    });

    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + path.string());
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "write failed: " + path.string());
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (data.size() < sizeof kMagic + 4 ||
        std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw CheckpointError(CheckpointError::Kind::bad_magic,
                              "not a checkpoint file: " + path.string());
    const size_t body = data.size() - 4;
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= uint32_t(uint8_t(data[body + size_t(i)])) << (8 * i);
    if (crc32(data.data(), body) != stored)
        throw CheckpointError(CheckpointError::Kind::bad_checksum,
                              "checksum mismatch: " + path.string());

    Reader r(data, body);
    std::map<std::string, std::string> header;
    const uint32_t pairs = r.u32();
    for (uint32_t i = 0; i < pairs; ++i) {
        std::string key = r.str();
        header[key] = r.str();
    }
    auto get = [&header, &path](const std::string& key) -> const std::string& {
        auto it = header.find(key);
        if (it == header.end())
            throw CheckpointError(CheckpointError::Kind::bad_header,
                                  "missing header key '" + key + "' in " + path.string());
        return it->second;
    };
    auto get_int = [&get](const std::string& key) {
        int v = 0;
        const std::string& s = get(key);
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw CheckpointError(CheckpointError::Kind::bad_header, "bad integer for " + key);
        return v;
    };

    HyperParams hp;
    hp.rel_dim = get_int("rel_dim");
    hp.ent_dim = get_int("ent_dim");
    hp.rel_hidden = get_int("rel_hidden");
    hp.ent_hidden = get_int("ent_hidden");
    hp.rel_layers = get_int("rel_layers");
    hp.ent_layers = get_int("ent_layers");
    hp.rel_heads = get_int("rel_heads");
    hp.ent_heads = get_int("ent_heads");
    hp.num_bins = get_int("bins");
    hp.margin = std::strtod(get("margin").c_str(), nullptr);
    const std::string agg = get("aggregator");
    if (agg == "attention")
        hp.aggregator = Aggregator::attention;
    else if (agg == "mean")
        hp.aggregator = Aggregator::mean;
    else if (agg == "sum")
        hp.aggregator = Aggregator::sum;
    else
        throw CheckpointError(CheckpointError::Kind::bad_header, "unknown aggregator " + agg);
    const std::string sl = get("self_loop");
    if (sl == "mean_relation")
        hp.self_loop = SelfLoop::mean_relation;
    else if (sl == "learned_vector")
        hp.self_loop = SelfLoop::learned_vector;
    else
        throw CheckpointError(CheckpointError::Kind::bad_header, "unknown self_loop " + sl);
    hp.relation_update = get("relation_update") == "true";

    ModelParameters params;
    try {
        params = ModelParameters::shaped(hp);
    } catch (const ConfigError& e) {
        throw CheckpointError(CheckpointError::Kind::bad_header, e.what());
    }
    params.train_seed = std::strtoull(get("seed").c_str(), nullptr, 10);

    params.for_each_parameter([&r](const std::string& name, Tensor& t) {
        const uint32_t rows = r.u32();
        const uint32_t cols = r.u32();
        if (int(rows) != t.rows || int(cols) != t.cols)
            throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                  "tensor " + name + " has shape " + std::to_string(rows) + "x" +
                                      std::to_string(cols) + ", expected " +
                                      std::to_string(t.rows) + "x" + std::to_string(t.cols));
        for (double& x : t.v) x = r.f64();
    });
    if (!r.exhausted())
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "trailing bytes in " + path.string());
    return params;
}

}  // namespace ingram
