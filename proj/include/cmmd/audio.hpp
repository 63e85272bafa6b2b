#pragma once

#include <complex>
#include <string>
#include <vector>

#include "cmmd/tensor.hpp"

namespace cmmd {

inline constexpr double kSampleRate = 16000.0;
inline constexpr std::size_t kStftWindow = 512; // 32 ms at 16 kHz
inline constexpr std::size_t kStftHop = 256;    // 50% overlap, 16 ms resolution
inline constexpr std::size_t kStftPad = 64;     // reflect padding per side
inline constexpr std::size_t kMelBins = 80;
inline constexpr double kLogFloor = 1e-5;

struct Waveform {
    std::vector<double> samples; // normalized to [-1, 1]
    double sample_rate = kSampleRate;

    double duration() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// RIFF WAVE, PCM16 LE. Stereo is downmixed by averaging; anything else is
// rejected.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Windowed one-sided DFT frames (kStftWindow/2 + 1 bins each). The signal is
// reflect-padded kStftPad samples per side with non-centered frames, so a
// 1.8 s clip at 16 kHz yields exactly 112 frames.
std::vector<std::vector<std::complex<double>>> stft(const Waveform& w);

// Time in seconds of the center of frame f in input coordinates.
double stft_frame_time(std::size_t frame);

struct MelSpectrogram {
    Tensor frames;     // (T, 80) log-magnitude values
    double frame_rate; // Hz
};

// Magnitude STFT -> 80 triangular area-normalized mel filters spanning
// 0 Hz .. Nyquist -> log(x + 1e-5). Requires 16 kHz input.
MelSpectrogram mel_spectrogram(const Waveform& w);

// Triangular filter center frequencies in Hz (80 values).
std::vector<double> mel_center_frequencies();

// Half-wave-rectified first temporal difference of the log-mel, summed over
// bins; out[0] = 0.
std::vector<double> onset_envelope(const MelSpectrogram& m);

struct TempoEstimate {
    double bpm = 0.0;
    double confidence = 0.0; // normalized autocorrelation peak
    bool low_confidence = false;
};

// Autocorrelation of the mean-removed envelope, peak searched over
// 40-240 BPM with quadratic interpolation.
TempoEstimate estimate_tempo(const std::vector<double>& onset, double frame_rate);

struct BeatTrack {
    std::vector<double> beat_times; // strictly increasing seconds
    double tempo_bpm = 0.0;
};

// Dynamic-programming tracker: maximizes onset strength plus a log-Gaussian
// inter-beat-interval penalty around the tempo period, then backtracks.
BeatTrack track_beats(const std::vector<double>& onset, double tempo_bpm,
                      double frame_rate);

// Greedy one-to-one in-order matching; hit rate anchored on the reference
// beats (matched / reference count) unless anchor_on_generated is set.
double beat_hit_rate(const BeatTrack& generated, const BeatTrack& reference,
                     double tolerance_s, bool anchor_on_generated = false);

void write_beat_track(const std::string& path, const BeatTrack& track);

} // namespace cmmd
