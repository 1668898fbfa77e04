#pragma once

#include "avphon/types.hpp"

namespace avphon::fusion {

enum class Modality { Audio, Visual };

/// Per-window concatenation of audio and visual sequences sharing a grid,
/// audio dimensions first. Throws DataError (naming the utterance) on grid
/// or length mismatch.
FeatureSequence concat_modalities(const FeatureSequence& audio_seq,
                                  const FeatureSequence& visual_seq);

/// Restricts a sequence to one modality's dimensions; grid preserved.
/// Throws DataError when the kept modality has an empty range.
FeatureSequence drop_modality(const FeatureSequence& seq, Modality keep);

/// Optional per-dimension standardization fit on training data (off by
/// default in the pipeline; covariances absorb scale differences otherwise).
struct Standardizer {
    Vec mean;
    Vec scale;  // 1/std, dimensions with zero variance pass through unscaled
};

Standardizer fit_standardizer(const std::vector<FeatureSequence>& training);
FeatureSequence apply_standardizer(const FeatureSequence& seq, const Standardizer& st);

}  // namespace avphon::fusion
