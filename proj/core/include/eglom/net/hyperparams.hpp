#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace eglom::net {

struct HyperParams {
    std::size_t embedding_dim = 128;
    std::size_t decoder_dim = 256;
    std::size_t iterations = 10;
    std::size_t class_count = 2;

    /// Same-level previous-iteration weight, constant over iterations.
    double history_weight = 0.4;
    /// Object-level share of the attention average; bottom-up gets the rest.
    double attention_weight = 0.4;
    /// Attention logits are tau * <e_i, e_j>; larger is sharper.
    double attention_temperature = 1.0;
    bool attention_enabled = true;

    /// Share of the non-history level-1 weight still given to bottom-up on the
    /// final iteration. 0 means the last iteration is purely top-down.
    double end_bottom_up_weight = 0.0;
    /// When false, the history term is dropped on iteration 0 and its weight
    /// handed to bottom-up.
    bool history_from_first = true;

    std::size_t posenc_frequencies = 6;
    /// Grid coordinates are divided by this before the position encoding.
    double position_extent = 1.5;
    bool bottom_up_position = false;
    std::vector<std::size_t> symbol_decoder_hidden{64, 32};

    double lambda_reconstruction = 1.0;
    double lambda_object = 1.0;
    double lambda_regularizer = 0.1;
    /// Cross-entropy weight relative to pose MSE inside the object loss.
    double class_loss_weight = 1.0;

    std::size_t posenc_width() const noexcept { return 4 * posenc_frequencies; }

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;

    std::map<std::string, std::string> to_map() const;
    /// Applies known keys from `values`; unknown keys throw.
    static HyperParams from_map(const std::map<std::string, std::string>& values);
    static HyperParams from_map(const std::map<std::string, std::string>& values,
                                HyperParams base);

    /// Sets one field by its key; returns false for unknown keys.
    bool set(const std::string& key, const std::string& value);
};

/// Level-1 weights (bottom-up, top-down) for iteration t of T. The non-history
/// share 1 - history moves linearly from all bottom-up at t = 0 to
/// `end_bottom_up` at t = T - 1; with T = 1 it stays all bottom-up.
struct LevelWeights {
    double history = 0.0;
    double bottom_up = 0.0;
    double top_down = 0.0;
};

LevelWeights level1_schedule(std::size_t t, std::size_t total, double history,
                             double end_bottom_up = 0.0);

/// Level-2 weights (history, bottom-up, attention), constant over iterations.
struct ObjectLevelWeights {
    double history = 0.0;
    double bottom_up = 0.0;
    double attention = 0.0;
};

ObjectLevelWeights level2_weights(const HyperParams& hp, std::size_t t);

LevelWeights level1_weights(const HyperParams& hp, std::size_t t);

}  // namespace eglom::net
