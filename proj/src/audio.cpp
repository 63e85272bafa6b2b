#include "cmmd/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "cmmd/manifest.hpp"

namespace cmmd {

namespace {

// ---- WAV -----------------------------------------------------------------

std::uint32_t rd_u32(const unsigned char* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<char*>(b), 4);
}

void wr_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF)};
    out.write(reinterpret_cast<char*>(b), 2);
}

// ---- FFT -----------------------------------------------------------------

// Iterative radix-2 FFT, in place. n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
    std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<double> periodic_hann(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(n));
    }
    return w;
}

// ---- Mel -----------------------------------------------------------------

double hz_to_mel(double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// 82 boundary frequencies: filter m spans (edge[m], edge[m+1], edge[m+2]).
std::vector<double> mel_edges() {
    double lo = hz_to_mel(0.0);
    double hi = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> edges(kMelBins + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(kMelBins + 1));
    }
    return edges;
}

// (80 x 257) triangular filters, area-normalized by 2 / (f_hi - f_lo).
std::vector<double> mel_filterbank() {
    std::size_t bins = kStftWindow / 2 + 1;
    std::vector<double> edges = mel_edges();
    std::vector<double> bank(kMelBins * bins, 0.0);
    for (std::size_t m = 0; m < kMelBins; ++m) {
        double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
        double norm = 2.0 / (f2 - f0);
        for (std::size_t k = 0; k < bins; ++k) {
            double fk = static_cast<double>(k) * kSampleRate / kStftWindow;
            double w = 0.0;
            if (fk > f0 && fk < f1) {
                w = (fk - f0) / (f1 - f0);
            } else if (fk >= f1 && fk < f2) {
                w = (f2 - fk) / (f2 - f1);
            }
            bank[m * bins + k] = w * norm;
        }
    }
    return bank;
}

std::vector<double> reflect_pad(const std::vector<double>& x, std::size_t pad) {
    if (x.size() < pad + 1) {
        throw std::invalid_argument("stft: waveform too short for padding");
    }
    std::vector<double> out;
    out.reserve(x.size() + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) {
        out.push_back(x[pad - i]);
    }
    out.insert(out.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) {
        out.push_back(x[x.size() - 2 - i]);
    }
    return out;
}

} // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open WAV: " + path);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("not a RIFF WAVE file: " + path);
    }

    std::size_t pos = 12;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t chunk_len = rd_u32(&bytes[pos + 4]);
        if (std::memcmp(&bytes[pos], "fmt ", 4) == 0 && chunk_len >= 16) {
            format = rd_u16(&bytes[pos + 8]);
            channels = rd_u16(&bytes[pos + 10]);
            rate = rd_u32(&bytes[pos + 12]);
            bits = rd_u16(&bytes[pos + 22]);
        } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
            data = &bytes[pos + 8];
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }
    if (format != 1 || bits != 16) {
        throw std::runtime_error("unsupported WAV encoding (need PCM16): " + path);
    }
    if (channels != 1 && channels != 2) {
        throw std::runtime_error("unsupported channel count: " + path);
    }
    if (data == nullptr || data_len == 0) {
        throw std::runtime_error("WAV has no data chunk: " + path);
    }

    std::size_t sample_count = data_len / (2 * channels);
    Waveform w;
    w.sample_rate = rate;
    w.samples.resize(sample_count);
    for (std::size_t i = 0; i < sample_count; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            auto raw = static_cast<std::int16_t>(rd_u16(&data[(i * channels + c) * 2]));
            acc += static_cast<double>(raw) / 32768.0;
        }
        w.samples[i] = acc / channels;
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
    out.write("RIFF", 4);
    wr_u32(out, 36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    wr_u32(out, 16);
    wr_u16(out, 1); // PCM
    wr_u16(out, 1); // mono
    wr_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    wr_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
    wr_u16(out, 2);
    wr_u16(out, 16);
    out.write("data", 4);
    wr_u32(out, data_len);
    for (double s : w.samples) {
        double clamped = std::clamp(s, -1.0, 1.0);
        auto v = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
        wr_u16(out, static_cast<std::uint16_t>(v));
    }
}

std::vector<std::vector<std::complex<double>>> stft(const Waveform& w) {
    if (w.samples.empty()) {
        throw std::invalid_argument("stft: empty waveform");
    }
    std::vector<double> padded = reflect_pad(w.samples, kStftPad);
    if (padded.size() < kStftWindow) {
        throw std::invalid_argument("stft: waveform shorter than one window");
    }
    std::size_t frames = (padded.size() - kStftWindow) / kStftHop + 1;
    std::vector<double> window = periodic_hann(kStftWindow);
    std::size_t bins = kStftWindow / 2 + 1;

    std::vector<std::vector<std::complex<double>>> out(frames);
    std::vector<std::complex<double>> buf(kStftWindow);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* seg = &padded[f * kStftHop];
        for (std::size_t i = 0; i < kStftWindow; ++i) {
            buf[i] = std::complex<double>(seg[i] * window[i], 0.0);
        }
        fft_radix2(buf);
        out[f].assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(bins));
    }
    return out;
}

double stft_frame_time(std::size_t frame) {
    // center of the frame's span in original (pre-padding) coordinates
    double center = static_cast<double>(frame * kStftHop) - static_cast<double>(kStftPad) +
                    static_cast<double>(kStftWindow) / 2.0;
    return center / kSampleRate;
}

std::vector<double> mel_center_frequencies() {
    std::vector<double> edges = mel_edges();
    return std::vector<double>(edges.begin() + 1, edges.begin() + 1 + kMelBins);
}

MelSpectrogram mel_spectrogram(const Waveform& w) {
    if (w.sample_rate != kSampleRate) {
        throw std::invalid_argument("mel_spectrogram: expected 16 kHz input");
    }
    auto frames = stft(w);
    std::vector<double> bank = mel_filterbank();
    std::size_t bins = kStftWindow / 2 + 1;

    MelSpectrogram mel;
    mel.frame_rate = kSampleRate / kStftHop;
    mel.frames = Tensor({frames.size(), kMelBins});
    std::vector<double> mag(bins);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (std::size_t k = 0; k < bins; ++k) {
            mag[k] = std::abs(frames[f][k]);
        }
        for (std::size_t m = 0; m < kMelBins; ++m) {
            const double* row = &bank[m * bins];
            double acc = 0.0;
            for (std::size_t k = 0; k < bins; ++k) {
                acc += row[k] * mag[k];
            }
            mel.frames.at2(f, m) = std::log(acc + kLogFloor);
        }
    }
    return mel;
}

std::vector<double> onset_envelope(const MelSpectrogram& m) {
    std::size_t frames = m.frames.dim(0);
    if (frames < 2) {
        throw std::invalid_argument("onset_envelope: need at least two frames");
    }
    std::vector<double> env(frames, 0.0);
    for (std::size_t t = 1; t < frames; ++t) {
        double acc = 0.0;
        for (std::size_t b = 0; b < kMelBins; ++b) {
            double d = m.frames.at2(t, b) - m.frames.at2(t - 1, b);
            if (d > 0.0) {
                acc += d;
            }
        }
        env[t] = acc;
    }
    return env;
}

TempoEstimate estimate_tempo(const std::vector<double>& onset, double frame_rate) {
    double mean = 0.0;
    for (double x : onset) {
        mean += x;
    }
    mean /= static_cast<double>(onset.size());
    std::vector<double> centered(onset.size());
    double energy = 0.0;
    for (std::size_t i = 0; i < onset.size(); ++i) {
        centered[i] = onset[i] - mean;
        energy += centered[i] * centered[i];
    }
    if (energy <= 0.0) {
        throw std::invalid_argument("estimate_tempo: degenerate all-zero envelope");
    }

    auto lag_limit = [&](double bpm) {
        return frame_rate * 60.0 / bpm;
    };
    auto min_lag = static_cast<std::size_t>(std::ceil(lag_limit(240.0)));
    auto max_lag = static_cast<std::size_t>(std::floor(lag_limit(40.0)));
    max_lag = std::min(max_lag, onset.size() - 1);
    if (min_lag >= max_lag) {
        throw std::invalid_argument("estimate_tempo: envelope too short");
    }

    auto autocorr = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t i = lag; i < centered.size(); ++i) {
            acc += centered[i] * centered[i - lag];
        }
        return acc;
    };

    // log-normal tempo prior centered at 120 BPM (one-octave sigma) breaks
    // the octave ambiguity of a bare autocorrelation peak
    auto prior = [&](std::size_t lag) {
        double bpm = 60.0 * frame_rate / static_cast<double>(lag);
        double octaves = std::log2(bpm / 120.0);
        return std::exp(-0.5 * octaves * octaves);
    };
    auto weighted = [&](std::size_t lag) { return autocorr(lag) * prior(lag); };

    std::size_t best_lag = min_lag;
    double best = -1e300;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
        double v = weighted(lag);
        if (v > best) {
            best = v;
            best_lag = lag;
        }
    }

    // quadratic interpolation around the peak
    double refined = static_cast<double>(best_lag);
    if (best_lag > min_lag && best_lag < max_lag) {
        double ym = weighted(best_lag - 1), y0 = best, yp = weighted(best_lag + 1);
        double denom = ym - 2.0 * y0 + yp;
        if (denom < 0.0) {
            refined += 0.5 * (ym - yp) / denom;
        }
    }

    TempoEstimate est;
    est.bpm = 60.0 * frame_rate / refined;
    est.confidence = std::max(0.0, autocorr(best_lag)) / energy;
    est.low_confidence = est.confidence < 0.1;
    return est;
}

BeatTrack track_beats(const std::vector<double>& onset, double tempo_bpm,
                      double frame_rate) {
    if (!(tempo_bpm >= 40.0 && tempo_bpm <= 240.0)) {
        throw std::invalid_argument("track_beats: tempo outside [40, 240] BPM");
    }
    BeatTrack track;
    track.tempo_bpm = tempo_bpm;

    double peak = 0.0;
    for (double x : onset) {
        peak = std::max(peak, x);
    }
    if (peak <= 0.0) {
        return track; // silence: no beats
    }
    std::vector<double> strength(onset.size());
    for (std::size_t i = 0; i < onset.size(); ++i) {
        strength[i] = onset[i] / peak;
    }

    double period = frame_rate * 60.0 / tempo_bpm;
    auto lo = static_cast<long>(std::lround(period / 2.0));
    auto hi = static_cast<long>(std::lround(period * 2.0));
    constexpr double kIntervalWeight = 100.0;

    std::size_t frames = strength.size();
    std::vector<double> score(frames);
    std::vector<long> from(frames, -1);
    for (std::size_t f = 0; f < frames; ++f) {
        double best = 0.0; // chains may start anywhere at no cost
        long best_prev = -1;
        for (long d = lo; d <= hi; ++d) {
            long p = static_cast<long>(f) - d;
            if (p < 0) {
                break;
            }
            double dev = std::log(static_cast<double>(d) / period);
            double cand = score[static_cast<std::size_t>(p)] - kIntervalWeight * dev * dev;
            if (cand > best) {
                best = cand;
                best_prev = p;
            }
        }
        score[f] = strength[f] + best;
        from[f] = best_prev;
    }

    // backtrack from the best score in the final period
    std::size_t tail_start = frames > static_cast<std::size_t>(period)
                                 ? frames - static_cast<std::size_t>(period)
                                 : 0;
    std::size_t cursor = tail_start;
    for (std::size_t f = tail_start; f < frames; ++f) {
        if (score[f] > score[cursor]) {
            cursor = f;
        }
    }
    std::vector<std::size_t> beats;
    for (long f = static_cast<long>(cursor); f >= 0; f = from[static_cast<std::size_t>(f)]) {
        beats.push_back(static_cast<std::size_t>(f));
        if (from[static_cast<std::size_t>(f)] < 0) {
            break;
        }
    }
    std::reverse(beats.begin(), beats.end());

    double hop_time = 1.0 / frame_rate;
    double origin = stft_frame_time(0);
    for (std::size_t f : beats) {
        track.beat_times.push_back(origin + static_cast<double>(f) * hop_time);
    }
    return track;
}

double beat_hit_rate(const BeatTrack& generated, const BeatTrack& reference,
                     double tolerance_s, bool anchor_on_generated) {
    const std::vector<double>& anchor =
        anchor_on_generated ? generated.beat_times : reference.beat_times;
    const std::vector<double>& other =
        anchor_on_generated ? reference.beat_times : generated.beat_times;
    if (anchor.empty()) {
        throw std::invalid_argument("beat_hit_rate: empty reference track");
    }
    std::size_t matched = 0;
    std::size_t i = 0, j = 0;
    while (i < anchor.size() && j < other.size()) {
        double diff = other[j] - anchor[i];
        if (std::abs(diff) <= tolerance_s) {
            ++matched;
            ++i;
            ++j;
        } else if (diff < 0.0) {
            ++j; // candidate beat too early, try the next one
        } else {
            ++i; // no candidate close enough; anchor beat missed
        }
    }
    return static_cast<double>(matched) / static_cast<double>(anchor.size());
}

void write_beat_track(const std::string& path, const BeatTrack& track) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    for (double t : track.beat_times) {
        out << format_double(t) << "\n";
    }
}

} // namespace cmmd
