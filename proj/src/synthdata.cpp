#include "cmmd/synthdata.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cmmd/manifest.hpp"
#include "cmmd/rng.hpp"

namespace cmmd {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

} // namespace

GaussianWorld identity_world(std::size_t dim) {
    GaussianWorld world;
    world.mu.assign(dim, 0.0);
    world.sigma.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        world.sigma[i * dim + i] = 1.0;
    }
    return world;
}

GaussianWorld block_world(std::size_t dv, std::size_t da, double rho, double mu_video,
                          double mu_audio) {
    if (rho != 0.0 && dv != da) {
        throw std::invalid_argument("block_world: rho coupling needs equal block sizes");
    }
    if (!(rho > -1.0 && rho < 1.0)) {
        throw std::invalid_argument("block_world: need |rho| < 1");
    }
    std::size_t d = dv + da;
    GaussianWorld world = identity_world(d);
    for (std::size_t i = 0; i < dv; ++i) {
        world.mu[i] = mu_video;
    }
    for (std::size_t i = dv; i < d; ++i) {
        world.mu[i] = mu_audio;
    }
    for (std::size_t i = 0; i < dv && rho != 0.0; ++i) {
        world.sigma[i * d + (dv + i)] = rho;
        world.sigma[(dv + i) * d + i] = rho;
    }
    return world;
}

std::vector<ModalPair> gaussian_pairs(const GaussianWorld& world, std::size_t count,
                                      const std::vector<std::size_t>& video_shape,
                                      const std::vector<std::size_t>& audio_shape,
                                      std::uint64_t seed) {
    std::size_t dv = shape_product(video_shape);
    std::size_t da = shape_product(audio_shape);
    if (dv + da != world.dim()) {
        throw std::invalid_argument("gaussian_pairs: shapes do not add up to world dim");
    }
    world.validate();

    auto di = static_cast<Eigen::Index>(world.dim());
    Eigen::Map<const Eigen::MatrixXd> sigma(world.sigma.data(), di, di);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("gaussian_pairs: covariance is not positive definite");
    }
    Eigen::MatrixXd chol = llt.matrixL();

    Rng base(seed);
    std::vector<ModalPair> out;
    out.reserve(count);
    for (std::size_t item = 0; item < count; ++item) {
        Rng rng = base.stream(item);
        Eigen::VectorXd z(di);
        for (Eigen::Index i = 0; i < di; ++i) {
            z[i] = rng.normal();
        }
        Eigen::VectorXd x = chol * z;
        ModalPair pair{Tensor(video_shape), Tensor(audio_shape)};
        for (std::size_t i = 0; i < dv; ++i) {
            pair.video[i] = world.mu[i] + x[static_cast<Eigen::Index>(i)];
        }
        for (std::size_t i = 0; i < da; ++i) {
            pair.audio[i] = world.mu[dv + i] + x[static_cast<Eigen::Index>(dv + i)];
        }
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<std::size_t> event_audio_steps(std::size_t frame, std::size_t frames,
                                           std::size_t steps) {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < steps; ++t) {
        if (nn_index(t, frames, steps) == frame) {
            out.push_back(t);
        }
    }
    return out;
}

std::vector<EventItem> event_pairs(const EventDatasetConfig& config) {
    if (config.events_per_clip < 1) {
        throw std::invalid_argument("event_pairs: need at least one event per clip");
    }
    // min spacing 2 means frames at least 2 apart; k events need 2k-1 frames
    if (2 * config.events_per_clip - 1 > config.frames) {
        throw std::invalid_argument("event_pairs: events collide, too many for the clip");
    }

    Rng base(config.seed);
    std::vector<EventItem> out;
    out.reserve(config.num_items);
    for (std::size_t item = 0; item < config.num_items; ++item) {
        Rng rng = base.stream(item);

        std::vector<std::size_t> frames;
        while (frames.size() < config.events_per_clip) {
            auto f = static_cast<std::size_t>(rng.index(config.frames));
            bool ok = true;
            for (std::size_t existing : frames) {
                std::size_t gap = existing > f ? existing - f : f - existing;
                if (gap < 2) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                frames.push_back(f);
            }
        }
        std::sort(frames.begin(), frames.end());

        EventItem ev;
        ev.event_frames = frames;
        ev.pair.video = Tensor({config.frames, config.video_channels, config.height,
                                config.width});
        ev.pair.audio = Tensor({config.steps, config.audio_channels});
        for (auto& x : ev.pair.video.data()) {
            x = config.noise_level * rng.normal();
        }
        for (auto& x : ev.pair.audio.data()) {
            x = config.noise_level * rng.normal();
        }
        std::size_t plane = config.height * config.width;
        for (std::size_t f : frames) {
            for (std::size_t c = 0; c < config.video_channels; ++c) {
                double* p = &ev.pair.video.data()[(f * config.video_channels + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) {
                    p[i] += config.amplitude;
                }
            }
            for (std::size_t t : event_audio_steps(f, config.frames, config.steps)) {
                for (std::size_t c = 0; c < config.audio_channels; ++c) {
                    ev.pair.audio.at2(t, c) += config.amplitude;
                }
            }
        }
        out.push_back(std::move(ev));
    }
    return out;
}

namespace {

// Robust background threshold: median + 3 * 1.4826 * MAD.
double event_threshold(std::vector<double> values) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        dev[i] = std::abs(values[i] - median);
    }
    std::sort(dev.begin(), dev.end());
    double mad = dev[dev.size() / 2];
    return median + 3.0 * 1.4826 * mad + 1e-12;
}

// Collapse detected positions into maximal consecutive runs; each run at
// least min_run long becomes one event at its center position. Shorter
// runs are noise: a genuine audio event spans the whole preimage of its
// frame, never an isolated column.
std::vector<std::size_t> collapse_runs(const std::vector<std::size_t>& detected,
                                       std::size_t min_run = 1) {
    std::vector<std::size_t> events;
    std::size_t run_start = 0;
    for (std::size_t i = 0; i < detected.size(); ++i) {
        bool run_end = (i + 1 == detected.size()) || (detected[i + 1] != detected[i] + 1);
        if (run_end) {
            if (i - run_start + 1 >= min_run) {
                events.push_back(detected[(run_start + i) / 2]);
            }
            run_start = i + 1;
        }
    }
    return events;
}

} // namespace

std::optional<double> alignment_score(const Tensor& video, const Tensor& audio,
                                      double tolerance_frames) {
    require_video(video, "alignment_score");
    require_audio(audio, "alignment_score");
    std::size_t frames = video.dim(0), steps = audio.dim(0);

    Tensor pooled = spatial_mean_pool(video); // (F, C_v)
    std::vector<double> frame_mean(frames, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < video.dim(1); ++c) {
            frame_mean[f] += pooled.at2(f, c);
        }
        frame_mean[f] /= static_cast<double>(video.dim(1));
    }
    std::vector<double> column_mean(steps, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < audio.dim(1); ++c) {
            column_mean[t] += audio.at2(t, c);
        }
        column_mean[t] /= static_cast<double>(audio.dim(1));
    }

    double video_thr = event_threshold(frame_mean);
    double audio_thr = event_threshold(column_mean);

    std::vector<std::size_t> video_detected;
    for (std::size_t f = 0; f < frames; ++f) {
        if (frame_mean[f] > video_thr) {
            video_detected.push_back(f);
        }
    }
    std::vector<std::size_t> audio_detected;
    for (std::size_t t = 0; t < steps; ++t) {
        if (column_mean[t] > audio_thr) {
            audio_detected.push_back(t);
        }
    }

    std::vector<std::size_t> video_events = collapse_runs(video_detected);
    if (video_events.empty()) {
        return std::nullopt;
    }
    std::size_t min_run = std::max<std::size_t>(1, steps / frames / 2);
    std::vector<std::size_t> audio_event_frames;
    for (std::size_t t : collapse_runs(audio_detected, min_run)) {
        audio_event_frames.push_back(nn_index(t, frames, steps));
    }

    // greedy one-to-one matching in time order
    std::size_t matched = 0;
    std::size_t i = 0, j = 0;
    while (i < video_events.size() && j < audio_event_frames.size()) {
        double diff = static_cast<double>(audio_event_frames[j]) -
                      static_cast<double>(video_events[i]);
        if (std::abs(diff) <= tolerance_frames) {
            ++matched;
            ++i;
            ++j;
        } else if (diff < 0.0) {
            ++j;
        } else {
            ++i;
        }
    }
    return static_cast<double>(matched) / static_cast<double>(video_events.size());
}

namespace {

std::string item_path(const std::string& dir, std::size_t index, const char* modality) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "item_%05zu_%s.ct", index, modality);
    return (std::filesystem::path(dir) / buf).string();
}

void write_index(const std::string& dir, std::size_t count,
                 const std::vector<std::vector<std::size_t>>* events) {
    std::ofstream out(std::filesystem::path(dir) / "index.txt", std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write dataset index in " + dir);
    }
    for (std::size_t i = 0; i < count; ++i) {
        out << "item " << i << " stream " << i;
        if (events != nullptr) {
            out << " events";
            for (std::size_t f : (*events)[i]) {
                out << " " << f;
            }
        }
        out << "\n";
    }
}

} // namespace

void save_dataset(const std::string& dir, const std::vector<EventItem>& items) {
    std::filesystem::create_directories(dir);
    std::vector<std::vector<std::size_t>> events;
    for (std::size_t i = 0; i < items.size(); ++i) {
        save_tensor(item_path(dir, i, "video"), items[i].pair.video);
        save_tensor(item_path(dir, i, "audio"), items[i].pair.audio);
        events.push_back(items[i].event_frames);
    }
    write_index(dir, items.size(), &events);
}

void save_dataset(const std::string& dir, const std::vector<ModalPair>& items) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < items.size(); ++i) {
        save_tensor(item_path(dir, i, "video"), items[i].video);
        save_tensor(item_path(dir, i, "audio"), items[i].audio);
    }
    write_index(dir, items.size(), nullptr);
}

StoredDataset load_dataset(const std::string& dir) {
    std::ifstream index(std::filesystem::path(dir) / "index.txt", std::ios::binary);
    if (!index) {
        throw std::runtime_error("no dataset index in " + dir);
    }
    StoredDataset ds;
    std::string line;
    while (std::getline(index, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream in(line);
        std::string tag;
        std::size_t id = 0;
        in >> tag >> id;
        if (tag != "item") {
            throw std::runtime_error("malformed dataset index line: " + line);
        }
        ModalPair pair;
        pair.video = load_tensor(item_path(dir, id, "video"));
        pair.audio = load_tensor(item_path(dir, id, "audio"));
        ds.items.push_back(std::move(pair));

        std::vector<std::size_t> events;
        std::string word;
        bool in_events = false;
        while (in >> word) {
            if (word == "events") {
                in_events = true;
            } else if (in_events) {
                events.push_back(std::strtoull(word.c_str(), nullptr, 10));
            }
        }
        ds.event_frames.push_back(std::move(events));
    }
    ds.kind = ds.event_frames.empty() || ds.event_frames[0].empty() ? "gaussian" : "event";
    return ds;
}

} // namespace cmmd
