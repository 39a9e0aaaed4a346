// ============================================================================
// Seeded synthetic PPG generation: pulse trains with class-dependent RR
// statistics, quality-conditioned corruption, and labeled corpora with
// controlled label noise. Fully deterministic under (inputs, seed);
// per-patient sub-seeds keep parallel and serial runs bit-identical.
// ============================================================================

#pragma once
#include <cstdint>
#include <string>

#include "ppgaf/dataset.hpp"
#include "ppgaf/signal.hpp"

namespace ppgaf {

struct RhythmSpec {
    Label rhythm = Label::NSR;
    double mean_rr_s = 0.85;   // must stay in [0.3, 2.0]
    double rr_jitter_s = 0.04; // NSR/PVC base dispersion
    int pvc_period = 5;        // beats between ectopics (PVC only)

    void validate() const;
};

struct NoiseSpec {
    double p_flip_good = 0.0;   // observed-label flip probability, GOOD segments
    double p_flip_bad = 0.0;    // ditto, BAD segments; must be >= p_flip_good
    double p_bad_quality = 0.0; // chance a segment is heavily corrupted

    // Corruption levels (BAD branch) and the light noise floor (GOOD branch).
    double light_noise_sigma = 0.02;
    double wander_amp = 0.5;
    double noise_sigma = 0.4;
    double burst_fraction = 0.35;  // minimum fraction of samples replaced by bursts

    void validate() const;
};

// Two-Gaussian pulse train (systolic peak + dicrotic bump). RR sequence:
//   NSR: Normal(mean_rr, jitter) clipped to [0.4, 1.4]
//   AF:  Uniform(0.45, 1.25) independent per beat
//   PVC: NSR with every pvc_period-th beat premature (RR x0.6, amplitude
//        x0.6) followed by a compensatory pause (RR x1.4)
Waveform gen_beat_train(const RhythmSpec& spec, double duration_s, double fs_hz, uint64_t seed);

struct CorruptResult {
    Waveform waveform;
    QualityFlag quality;  // ground truth, decided by the p_bad_quality draw
};

// With probability p_bad_quality: artifact bursts (bounded random walks
// replacing >= burst_fraction of samples), baseline wander and additive
// noise, flagged BAD. Otherwise light noise only, flagged GOOD.
CorruptResult corrupt(const Waveform& w, const NoiseSpec& noise, uint64_t seed);

struct CorpusSpec {
    size_t n_patients = 10;
    size_t segs_per_patient = 10;
    double mix_af = 0.5;
    double mix_nsr = 0.3;
    double mix_pvc = 0.2;
    NoiseSpec noise;
    double window_s = 30.0;
    double fs_hz = 240.0;
    uint64_t seed = 0;
    bool mixed_patients = false;  // default: one rhythm class per patient
    std::string patient_prefix = "synth";
    RhythmSpec rhythm;            // template; rhythm + pvc settings per class

    void validate() const;
};

// Observed label = true label flipped across the AF / non-AF boundary with
// the quality-conditioned probability; true labels are never mutated.
Dataset gen_labeled_corpus(const CorpusSpec& spec);

}  // namespace ppgaf
