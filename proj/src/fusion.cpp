#include "avphon/fusion.hpp"

#include <cmath>

namespace avphon::fusion {

FeatureSequence concat_modalities(const FeatureSequence& audio_seq,
                                  const FeatureSequence& visual_seq) {
    if (audio_seq.layout.audio_dim == 0 || audio_seq.layout.visual_dim != 0)
        throw DataError("concat: first argument must be an audio-only sequence");
    if (visual_seq.layout.visual_dim == 0 || visual_seq.layout.audio_dim != 0)
        throw DataError("concat: second argument must be a visual-only sequence");
    if (audio_seq.utterance != visual_seq.utterance)
        throw DataError("concat: utterance mismatch ('" + audio_seq.utterance + "' vs '" +
                        visual_seq.utterance + "')");
    if (audio_seq.size() != visual_seq.size() || !grids_equal(audio_seq.grid, visual_seq.grid))
        throw DataError("concat: window grids differ for utterance '" + audio_seq.utterance +
                        "'");

    FeatureSequence out;
    out.vectors.resize(audio_seq.size(), audio_seq.dims() + visual_seq.dims());
    out.vectors << audio_seq.vectors, visual_seq.vectors;
    out.layout = ModalityLayout{audio_seq.layout.audio_dim, visual_seq.layout.visual_dim};
    out.grid = audio_seq.grid;
    out.utterance = audio_seq.utterance;
    return out;
}

FeatureSequence drop_modality(const FeatureSequence& seq, Modality keep) {
    const int a = seq.layout.audio_dim;
    const int v = seq.layout.visual_dim;
    FeatureSequence out;
    if (keep == Modality::Audio) {
        if (a == 0) throw DataError("drop_modality: sequence has no audio dimensions");
        out.vectors = seq.vectors.leftCols(a);
        out.layout = ModalityLayout{a, 0};
    } else {
        if (v == 0) throw DataError("drop_modality: sequence has no visual dimensions");
        out.vectors = seq.vectors.rightCols(v);
        out.layout = ModalityLayout{0, v};
    }
    out.grid = seq.grid;
    out.utterance = seq.utterance;
    return out;
}

Standardizer fit_standardizer(const std::vector<FeatureSequence>& training) {
    if (training.empty()) throw DataError("standardizer: no training sequences");
    const int d = training.front().dims();
    Vec sum = Vec::Zero(d), sumsq = Vec::Zero(d);
    double n = 0;
    for (const auto& seq : training) {
        if (seq.dims() != d) throw DataError("standardizer: inconsistent dimensionality");
        sum += seq.vectors.colwise().sum();
        sumsq += seq.vectors.array().square().colwise().sum().matrix();
        n += static_cast<double>(seq.size());
    }
    Standardizer st;
    st.mean = sum / n;
    st.scale.resize(d);
    for (int j = 0; j < d; ++j) {
        const double var = sumsq[j] / n - st.mean[j] * st.mean[j];
        st.scale[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    }
    return st;
}

FeatureSequence apply_standardizer(const FeatureSequence& seq, const Standardizer& st) {
    if (seq.dims() != st.mean.size())
        throw DataError("standardizer: dimension mismatch");
    FeatureSequence out = seq;
    out.vectors = (seq.vectors.rowwise() - st.mean.transpose()).array().rowwise() *
                  st.scale.transpose().array();
    return out;
}

}  // namespace avphon::fusion
