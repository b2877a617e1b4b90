#pragma once

#include "eglom/world/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace eglom::world {

/// Malformed dataset file. `record()` is the index of the scene record being
/// read when the problem was found, or empty for header errors.
class DatasetParseError : public std::runtime_error {
public:
    DatasetParseError(const std::string& what, std::optional<std::size_t> record)
        : std::runtime_error(what), record_(record) {}
    std::optional<std::size_t> record() const noexcept { return record_; }

private:
    std::optional<std::size_t> record_;
};

class DatasetVersionError : public DatasetParseError {
public:
    DatasetVersionError(const std::string& what) : DatasetParseError(what, std::nullopt) {}
};

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

/// Binary layout, all integers and doubles little-endian:
///
///   "EGLD" u32 version u32 task u64 count f64 cell
///   u32 n_templates { i32 id, i32 class, u32 name_len, name, 5 x 6 f64 }
///   count x { u64 payload_len, payload }
///
/// with payload = u32 n_objects { i32 template, i32 class, 5 f64 pose,
/// f64 rotation_distance } u32 n_locations { 2 f64 cell, 6 f64 input,
/// 6 f64 truth, i32 instance, i32 part, u8 perturbed }.
std::string encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::string& bytes);

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

/// Human-readable JSON rendering of the same content.
std::string dataset_to_json(const Dataset& ds, int indent = 1);

}  // namespace eglom::world
