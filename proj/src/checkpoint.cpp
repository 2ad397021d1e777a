#include "ukan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ukan {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
std::vector<std::uint8_t> raw_bytes(const T* data, std::size_t n) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data);
    return {p, p + n * sizeof(T)};
}

class Cursor {
public:
    explicit Cursor(const std::vector<std::uint8_t>& b) : b_(b) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::vector<std::uint8_t> bytes(std::uint64_t n) {
        need(n);
        std::vector<std::uint8_t> out(b_.begin() + pos_, b_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > b_.size() - pos_) throw Error("checkpoint truncated");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

std::size_t type_size(RecordType t) { return t == RecordType::f32 ? 4 : 8; }

}  // namespace

CheckpointRecord CheckpointRecord::from_tensor(std::string name, const Tensor& t) {
    CheckpointRecord r;
    r.name = std::move(name);
    r.shape = t.shape();
    if (t.dtype() == DType::f32) {
        r.type = RecordType::f32;
        r.payload = raw_bytes(t.data<float>().data(), t.numel());
    } else {
        r.type = RecordType::f64;
        r.payload = raw_bytes(t.data<double>().data(), t.numel());
    }
    return r;
}

CheckpointRecord CheckpointRecord::from_doubles(std::string name, const std::vector<double>& v) {
    CheckpointRecord r;
    r.name = std::move(name);
    r.type = RecordType::f64;
    r.shape = {static_cast<std::int64_t>(v.size())};
    r.payload = raw_bytes(v.data(), v.size());
    return r;
}

CheckpointRecord CheckpointRecord::from_ints(std::string name, const std::vector<std::int64_t>& v) {
    CheckpointRecord r;
    r.name = std::move(name);
    r.type = RecordType::i64;
    r.shape = {static_cast<std::int64_t>(v.size())};
    r.payload = raw_bytes(v.data(), v.size());
    return r;
}

std::int64_t CheckpointRecord::count() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor CheckpointRecord::to_tensor() const {
    if (type == RecordType::i64) throw DTypeError("checkpoint record '" + name + "' holds integers");
    if (type == RecordType::f32) {
        std::vector<float> v(count());
        std::memcpy(v.data(), payload.data(), payload.size());
        return Tensor::from_floats(shape, std::move(v));
    }
    std::vector<double> v(count());
    std::memcpy(v.data(), payload.data(), payload.size());
    return Tensor::from_doubles(shape, std::move(v));
}

std::vector<double> CheckpointRecord::doubles() const {
    if (type != RecordType::f64) throw DTypeError("checkpoint record '" + name + "' is not float64");
    std::vector<double> v(count());
    std::memcpy(v.data(), payload.data(), payload.size());
    return v;
}

std::vector<std::int64_t> CheckpointRecord::ints() const {
    if (type != RecordType::i64) throw DTypeError("checkpoint record '" + name + "' is not int64");
    std::vector<std::int64_t> v(count());
    std::memcpy(v.data(), payload.data(), payload.size());
    return v;
}

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

const CheckpointRecord& Checkpoint::get(const std::string& name) const {
    if (const auto* r = find(name)) return *r;
    throw Error("checkpoint has no record '" + name + "'");
}

std::vector<std::uint8_t> Checkpoint::encode() const {
    std::vector<std::uint8_t> out{'U', 'K', 'E', 'P'};
    put<std::uint32_t>(out, version);
    put<std::uint64_t>(out, config.size());
    out.insert(out.end(), config.begin(), config.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        if (static_cast<std::size_t>(r.count()) * type_size(r.type) != r.payload.size())
            throw Error("checkpoint record '" + r.name + "' payload does not match its shape");
        put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
        out.insert(out.end(), r.name.begin(), r.name.end());
        put<std::uint8_t>(out, static_cast<std::uint8_t>(r.type));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
        for (auto d : r.shape) put<std::int64_t>(out, d);
        out.insert(out.end(), r.payload.begin(), r.payload.end());
    }
    return out;
}

Checkpoint Checkpoint::decode(const std::vector<std::uint8_t>& bytes) {
    Cursor c(bytes);
    const auto magic = c.bytes(4);
    if (std::memcmp(magic.data(), "UKEP", 4) != 0) throw Error("not a checkpoint (bad magic)");
    Checkpoint ck;
    ck.version = c.get<std::uint32_t>();
    if (ck.version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(ck.version));
    const auto cfg = c.bytes(c.get<std::uint64_t>());
    ck.config.assign(cfg.begin(), cfg.end());
    const auto n = c.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        CheckpointRecord r;
        const auto name = c.bytes(c.get<std::uint32_t>());
        r.name.assign(name.begin(), name.end());
        const auto t = c.get<std::uint8_t>();
        if (t < 1 || t > 3) throw Error("checkpoint record '" + r.name + "' has unknown dtype code");
        r.type = static_cast<RecordType>(t);
        const auto rank = c.get<std::uint32_t>();
        if (rank > 16) throw Error("checkpoint record '" + r.name + "' has implausible rank");
        for (std::uint32_t k = 0; k < rank; ++k) {
            const auto d = c.get<std::int64_t>();
            if (d < 0) throw Error("checkpoint record '" + r.name + "' has a negative extent");
            r.shape.push_back(d);
        }
        r.payload = c.bytes(static_cast<std::uint64_t>(r.count()) * type_size(r.type));
        ck.records.push_back(std::move(r));
    }
    if (!c.done()) throw Error("trailing bytes after checkpoint records");
    return ck;
}

void Checkpoint::save(const std::string& path) const {
    const auto bytes = encode();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw Error("cannot write checkpoint '" + path + "'");
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw Error("write failed for checkpoint '" + path + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into place at '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode(bytes);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

}  // namespace ukan
