#include "cmmd/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cmmd/manifest.hpp"

namespace cmmd {

namespace {

constexpr const char* kHeaderLine = "cmmd-checkpoint v1";

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) {
            out += ",";
        }
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) {
            out.push_back(std::strtoull(tok.c_str(), nullptr, 10));
        }
    }
    return out;
}

} // namespace

NoiseSchedule make_schedule(const ScheduleDescriptor& desc) {
    if (desc.kind != "cosine") {
        throw std::invalid_argument("unknown schedule kind: " + desc.kind);
    }
    return cosine_schedule(desc.steps, desc.offset);
}

void save_checkpoint(const std::string& path, const ToyNet& net,
                     const ScheduleDescriptor& schedule, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << kHeaderLine << "\n";

    Manifest header;
    header.set("format_version", std::uint64_t{1});
    header.set("seed", seed);
    header.set("schedule.kind", schedule.kind);
    header.set("schedule.steps", static_cast<std::uint64_t>(schedule.steps));
    header.set("schedule.offset", schedule.offset);
    header.set("net.video_shape", join_sizes(net.config().video_shape));
    header.set("net.audio_shape", join_sizes(net.config().audio_shape));
    header.set("net.hidden", join_sizes(net.config().hidden));
    header.set("net.time_features", static_cast<std::uint64_t>(net.config().time_features));
    header.set("net.init_seed", net.init_seed());
    header.write(out);
    out << "\n";

    Tensor params({net.parameter_count()},
                  std::vector<double>(net.parameters().begin(), net.parameters().end()));
    write_named_tensor(out, "params", params);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open for reading: " + path);
    }
    std::string first;
    std::getline(in, first);
    if (first != kHeaderLine) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    Manifest header = Manifest::read(in);

    LoadedCheckpoint loaded;
    loaded.seed = header.get_u64("seed");
    loaded.schedule.kind = header.get("schedule.kind");
    loaded.schedule.steps = header.get_u64("schedule.steps");
    loaded.schedule.offset = header.get_double("schedule.offset");

    ToyNetConfig config;
    config.video_shape = split_sizes(header.get("net.video_shape"));
    config.audio_shape = split_sizes(header.get("net.audio_shape"));
    config.hidden = split_sizes(header.get("net.hidden"));
    config.time_features = header.get_u64("net.time_features");

    loaded.net = std::make_unique<ToyNet>(config, make_schedule(loaded.schedule),
                                          header.get_u64("net.init_seed"));

    auto [name, params] = read_named_tensor(in);
    if (name != "params" || params.size() != loaded.net->parameter_count()) {
        throw std::runtime_error("checkpoint: parameter block mismatch");
    }
    std::copy(params.data().begin(), params.data().end(),
              loaded.net->parameters().begin());
    return loaded;
}

} // namespace cmmd
