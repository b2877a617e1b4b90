#pragma once

#include "eglom/autodiff/adam.hpp"
#include "eglom/autodiff/tape.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace eglom::ad {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameters, optimizer state and free-form metadata of one model.
///
/// On disk this is a JSON document whose first member is the integer
/// "format_version". Parameters are grouped by the network name that prefixes
/// them ("bu0.w0" belongs to "bu0"), each entry carrying its shape and a flat
/// row-major value array. Doubles are written with round-trip precision.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    std::string kind;
    std::map<std::string, std::string> meta;
    ParameterSet params;
    std::optional<AdamState> optimizer;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eglom::ad
