// ============================================================================
// PPGW1 waveform container: 5-byte magic "PPGW1", u32-LE header length,
// UTF-8 JSON header {patient_id, fs_hz, start_time_ms, n_samples}, then
// n_samples IEEE-754 f32 little-endian.
// ============================================================================

#pragma once
#include <string>

#include "ppgaf/signal.hpp"

namespace ppgaf {

void write_ppgw1(const std::string& path, const Waveform& w);
Waveform read_ppgw1(const std::string& path);

}  // namespace ppgaf
