#include "ppgaf/synth.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ppgaf/errors.hpp"
#include "ppgaf/rng.hpp"

namespace ppgaf {

void RhythmSpec::validate() const {
    if (mean_rr_s < 0.3 || mean_rr_s > 2.0)
        throw ConfigError("rhythm: mean_rr_s must be in [0.3, 2.0]");
    if (rr_jitter_s < 0.0) throw ConfigError("rhythm: rr_jitter_s must be >= 0");
    if (pvc_period < 2) throw ConfigError("rhythm: pvc_period must be >= 2");
}

void NoiseSpec::validate() const {
    auto prob = [](double p, const char* name) {
        if (p < 0.0 || p > 1.0) throw ConfigError(std::string("noise: ") + name + " not in [0,1]");
    };
    prob(p_flip_good, "p_flip_good");
    prob(p_flip_bad, "p_flip_bad");
    prob(p_bad_quality, "p_bad_quality");
    if (p_flip_bad < p_flip_good)
        throw ConfigError("noise: p_flip_bad must be >= p_flip_good");
    if (light_noise_sigma < 0 || wander_amp < 0 || noise_sigma < 0)
        throw ConfigError("noise: corruption levels must be >= 0");
    if (burst_fraction < 0.0 || burst_fraction > 0.9)
        throw ConfigError("noise: burst_fraction must be in [0, 0.9]");
}

void CorpusSpec::validate() const {
    if (n_patients == 0 || segs_per_patient == 0)
        throw ConfigError("corpus: n_patients and segs_per_patient must be positive");
    if (std::abs(mix_af + mix_nsr + mix_pvc - 1.0) > 1e-6)
        throw ConfigError("corpus: class mix must sum to 1");
    if (mix_af < 0 || mix_nsr < 0 || mix_pvc < 0)
        throw ConfigError("corpus: class mix entries must be >= 0");
    if (window_s <= 0 || fs_hz <= 0) throw ConfigError("corpus: window_s and fs_hz must be positive");
    noise.validate();
    rhythm.validate();
}

namespace {

// Systolic peak + dicrotic bump; amplitudes 1.0 / 0.35, widths 0.09 / 0.12 s,
// bump delayed by 0.28 s.
constexpr double kSysAmp = 1.0;
constexpr double kSysWidth = 0.09;
constexpr double kDicAmp = 0.35;
constexpr double kDicWidth = 0.12;
constexpr double kDicDelay = 0.28;
constexpr double kPulseLo = -0.45;  // support of one pulse relative to its onset
constexpr double kPulseHi = 0.85;

struct Beat {
    double t;
    double amp;
};

// Beat k (0-based) is ectopic iff k > 0 and k % pvc_period == 0, so the k-th
// RR interval (leading into beat k) is 0.6x and the following one 1.4x.
std::vector<Beat> make_beats(const RhythmSpec& spec, double duration_s, Rng& rng) {
    std::vector<Beat> beats;
    double t = rng.uniform(0.0, spec.mean_rr_s);  // random phase
    for (int k = 0; t < duration_s + kPulseHi; ++k) {
        const bool ectopic =
            spec.rhythm == Label::PVC && k > 0 && k % spec.pvc_period == 0;
        beats.push_back({t, ectopic ? 0.6 : 1.0});

        double rr;
        if (spec.rhythm == Label::AF) {
            rr = rng.uniform(0.45, 1.25);
        } else {
            rr = std::clamp(rng.normal(spec.mean_rr_s, spec.rr_jitter_s), 0.4, 1.4);
            if (spec.rhythm == Label::PVC) {
                const int next = k + 1;
                if (next % spec.pvc_period == 0)
                    rr *= 0.6;      // interval leading into the ectopic
                else if (ectopic)
                    rr *= 1.4;      // compensatory pause after it
            }
        }
        t += rr;
    }
    return beats;
}

}  // namespace

Waveform gen_beat_train(const RhythmSpec& spec, double duration_s, double fs_hz, uint64_t seed) {
    spec.validate();
    if (duration_s <= 0 || fs_hz <= 0)
        throw ConfigError("gen_beat_train: duration and fs must be positive");

    Rng rng(seed);
    const std::vector<Beat> beats = make_beats(spec, duration_s, rng);

    Waveform w;
    w.fs_hz = fs_hz;
    w.start_time_ms = 0;
    const size_t n = static_cast<size_t>(std::llround(duration_s * fs_hz));
    w.samples.assign(n, 0.0f);

    for (const Beat& b : beats) {
        const long i0 = std::max<long>(0, std::lround((b.t + kPulseLo) * fs_hz));
        const long i1 = std::min<long>(static_cast<long>(n) - 1, std::lround((b.t + kPulseHi) * fs_hz));
        for (long i = i0; i <= i1; ++i) {
            const double tau = static_cast<double>(i) / fs_hz - b.t;
            const double sys = kSysAmp * std::exp(-0.5 * tau * tau / (kSysWidth * kSysWidth));
            const double dtau = tau - kDicDelay;
            const double dic = kDicAmp * std::exp(-0.5 * dtau * dtau / (kDicWidth * kDicWidth));
            w.samples[i] += static_cast<float>(b.amp * (sys + dic));
        }
    }
    return w;
}

CorruptResult corrupt(const Waveform& w, const NoiseSpec& noise, uint64_t seed) {
    noise.validate();
    Rng rng(seed);

    CorruptResult res;
    res.waveform = w;
    auto& x = res.waveform.samples;
    const size_t n = x.size();
    const bool bad = rng.bernoulli(noise.p_bad_quality);

    res.quality.source = QualitySource::GROUND_TRUTH;
    res.quality.value = bad ? Quality::BAD : Quality::GOOD;

    if (!bad) {
        if (noise.light_noise_sigma > 0)
            for (auto& v : x) v += static_cast<float>(rng.normal(0.0, noise.light_noise_sigma));
        return res;
    }

    // Baseline wander.
    if (noise.wander_amp > 0) {
        const double f = rng.uniform(0.05, 0.3);
        const double phase = rng.uniform(0.0, 6.283185307179586);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / w.fs_hz;
            x[i] += static_cast<float>(noise.wander_amp *
                                       std::sin(6.283185307179586 * f * t + phase));
        }
    }

    // Artifact bursts: bounded mean-reverting random walks replacing samples
    // until the requested fraction is covered. The reversion keeps burst
    // regions weakly autocorrelated at the SQI lags.
    if (noise.burst_fraction > 0 && n > 0) {
        std::vector<uint8_t> replaced(n, 0);
        size_t n_replaced = 0;
        const size_t target = static_cast<size_t>(std::ceil(noise.burst_fraction * n));
        int guard = 0;
        while (n_replaced < target && guard++ < 1000) {
            const size_t start = static_cast<size_t>(rng.below(n));
            const size_t len = std::max<size_t>(
                1, static_cast<size_t>(std::llround(rng.uniform(0.5, 4.0) * w.fs_hz)));
            double walk = rng.uniform(-0.5, 0.5);
            for (size_t i = start; i < std::min(n, start + len); ++i) {
                walk = std::clamp(0.75 * walk + rng.normal(0.0, 0.4), -1.5, 1.5);
                x[i] = static_cast<float>(walk);
                if (!replaced[i]) {
                    replaced[i] = 1;
                    ++n_replaced;
                }
            }
        }
    }

    // Additive wideband noise.
    if (noise.noise_sigma > 0)
        for (auto& v : x) v += static_cast<float>(rng.normal(0.0, noise.noise_sigma));

    return res;
}

Dataset gen_labeled_corpus(const CorpusSpec& spec) {
    spec.validate();

    const size_t win = static_cast<size_t>(std::llround(spec.window_s * spec.fs_hz));
    const int64_t window_ms = static_cast<int64_t>(std::llround(spec.window_s * 1000.0));

    std::vector<std::vector<DatasetRecord>> per_patient(spec.n_patients);

    // Patients are independent given their derived sub-seed, so this loop is
    // freely parallel and still bit-identical to the serial run.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (size_t p = 0; p < spec.n_patients; ++p) {
        const uint64_t pseed = derive_seed(spec.seed, p);
        Rng prng(derive_seed(pseed, 0));

        auto draw_class = [&](Rng& r) {
            const double u = r.uniform();
            if (u < spec.mix_af) return Label::AF;
            if (u < spec.mix_af + spec.mix_nsr) return Label::NSR;
            return Label::PVC;
        };
        const Label patient_class = draw_class(prng);

        char name[64];
        std::snprintf(name, sizeof(name), "%s-%04zu", spec.patient_prefix.c_str(), p);

        auto& recs = per_patient[p];
        recs.reserve(spec.segs_per_patient);
        for (size_t s = 0; s < spec.segs_per_patient; ++s) {
            const uint64_t sseed = derive_seed(pseed, 1 + s);
            Rng srng(derive_seed(sseed, 0));

            const Label true_label = spec.mixed_patients ? draw_class(srng) : patient_class;

            RhythmSpec rs = spec.rhythm;
            rs.rhythm = true_label;
            Waveform w = gen_beat_train(rs, spec.window_s, spec.fs_hz, derive_seed(sseed, 1));
            CorruptResult cr = corrupt(w, spec.noise, derive_seed(sseed, 2));

            DatasetRecord rec;
            rec.patient_id = name;
            rec.true_label = true_label;
            rec.quality = cr.quality;
            rec.provenance = Provenance::SYNTH;
            rec.t_start_ms = static_cast<int64_t>(s) * window_ms;
            rec.fs_hz = spec.fs_hz;
            rec.samples = minmax_normalize(cr.waveform.samples);
            rec.samples.resize(win);

            const double p_flip = cr.quality.value == Quality::BAD ? spec.noise.p_flip_bad
                                                                   : spec.noise.p_flip_good;
            Label observed = true_label;
            if (srng.bernoulli(p_flip)) {
                if (true_label == Label::AF)
                    observed = srng.bernoulli(0.5) ? Label::NSR : Label::PVC;
                else
                    observed = Label::AF;
            }
            rec.label = observed;
            recs.push_back(std::move(rec));
        }
    }

    Dataset ds;
    ds.records.reserve(spec.n_patients * spec.segs_per_patient);
    for (auto& recs : per_patient)
        ds.records.insert(ds.records.end(), std::make_move_iterator(recs.begin()),
                          std::make_move_iterator(recs.end()));

    ds.gen_params = {{"n_patients", spec.n_patients},
                     {"segs_per_patient", spec.segs_per_patient},
                     {"mix_af", spec.mix_af},
                     {"mix_nsr", spec.mix_nsr},
                     {"mix_pvc", spec.mix_pvc},
                     {"window_s", spec.window_s},
                     {"fs_hz", spec.fs_hz},
                     {"seed", spec.seed},
                     {"mixed_patients", spec.mixed_patients},
                     {"noise",
                      {{"p_flip_good", spec.noise.p_flip_good},
                       {"p_flip_bad", spec.noise.p_flip_bad},
                       {"p_bad_quality", spec.noise.p_bad_quality},
                       {"light_noise_sigma", spec.noise.light_noise_sigma},
                       {"wander_amp", spec.noise.wander_amp},
                       {"noise_sigma", spec.noise.noise_sigma},
                       {"burst_fraction", spec.noise.burst_fraction}}}};
    return ds;
}

}  // namespace ppgaf
