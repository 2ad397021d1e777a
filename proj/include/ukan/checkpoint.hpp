#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ukan/tensor.hpp"

namespace ukan {

// Binary layout, all integers little-endian:
//   "UKEP"  u32 version  u64 config_bytes  config (UTF-8 key = value text)
//   u32 record_count, then per record:
//   u32 name_bytes  name  u8 dtype (1 f32, 2 f64, 3 i64)  u32 rank  i64 dims[rank]  payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class RecordType : std::uint8_t { f32 = 1, f64 = 2, i64 = 3 };

struct CheckpointRecord {
    std::string name;
    RecordType type = RecordType::f32;
    Shape shape;
    std::vector<std::uint8_t> payload;  // little-endian

    static CheckpointRecord from_tensor(std::string name, const Tensor& t);
    static CheckpointRecord from_doubles(std::string name, const std::vector<double>& v);
    static CheckpointRecord from_ints(std::string name, const std::vector<std::int64_t>& v);

    std::int64_t count() const;
    Tensor to_tensor() const;  // f32 / f64 records only
    std::vector<double> doubles() const;
    std::vector<std::int64_t> ints() const;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config;
    std::vector<CheckpointRecord> records;

    const CheckpointRecord* find(const std::string& name) const;
    const CheckpointRecord& get(const std::string& name) const;

    std::vector<std::uint8_t> encode() const;
    static Checkpoint decode(const std::vector<std::uint8_t>& bytes);
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace ukan
