#include "cmmd/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <istream>
#include <stdexcept>

namespace cmmd {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return shape.empty() ? 0 : n;
}

void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
    for (std::size_t d : shape_) {
        require(d >= 1, "tensor dimensions must be >= 1");
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_size(shape_), "tensor data size does not match shape");
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) {
        x = value;
    }
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    require(axis < shape_.size(), "axis out of range");
    return shape_[axis];
}

double& Tensor::at4(std::size_t f, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((f * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at4(std::size_t f, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((f * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double& Tensor::at2(std::size_t t, std::size_t c) {
    return data_[t * shape_[1] + c];
}

double Tensor::at2(std::size_t t, std::size_t c) const {
    return data_[t * shape_[1] + c];
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

void require_video(const Tensor& t, const char* what) {
    require(t.rank() == 4, std::string(what) + ": expected rank-4 video tensor");
}

void require_audio(const Tensor& t, const char* what) {
    require(t.rank() == 2, std::string(what) + ": expected rank-2 audio tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    require(a.same_shape(b), std::string(what) + ": shape mismatch");
}

std::size_t nn_index(std::size_t i, std::size_t src_len, std::size_t target_len) {
    // round-half-down of (i + 0.5) * L / target - 0.5, clamped to [0, L-1]
    double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(src_len) /
                     static_cast<double>(target_len) -
                 0.5;
    double idx = std::ceil(pos - 0.5);
    if (idx < 0.0) {
        return 0;
    }
    std::size_t j = static_cast<std::size_t>(idx);
    return j >= src_len ? src_len - 1 : j;
}

Tensor nn_resample_time(const Tensor& x, std::size_t target_len) {
    require(x.rank() == 2, "nn_resample_time: expected a (L, C) sequence");
    require(x.dim(0) >= 1, "nn_resample_time: zero-length input");
    require(target_len >= 1, "nn_resample_time: zero-length target");
    std::size_t src_len = x.dim(0);
    std::size_t channels = x.dim(1);
    Tensor out({target_len, channels});
    for (std::size_t i = 0; i < target_len; ++i) {
        std::size_t j = nn_index(i, src_len, target_len);
        std::memcpy(&out.data()[i * channels], &x.data()[j * channels],
                    channels * sizeof(double));
    }
    return out;
}

Tensor spatial_mean_pool(const Tensor& v) {
    require_video(v, "spatial_mean_pool");
    std::size_t frames = v.dim(0), channels = v.dim(1), height = v.dim(2), width = v.dim(3);
    Tensor out({frames, channels});
    double inv = 1.0 / static_cast<double>(height * width);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < channels; ++c) {
            double sum = 0.0;
            const double* plane = &v.data()[((f * channels + c) * height) * width];
            for (std::size_t i = 0; i < height * width; ++i) {
                sum += plane[i];
            }
            out.at2(f, c) = sum * inv;
        }
    }
    return out;
}

Tensor broadcast_spatial(const Tensor& feat, std::size_t height, std::size_t width) {
    require(feat.rank() == 2, "broadcast_spatial: expected (F, C) features");
    require(height >= 1 && width >= 1, "broadcast_spatial: degenerate plane");
    std::size_t frames = feat.dim(0), channels = feat.dim(1);
    Tensor out({frames, channels, height, width});
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < channels; ++c) {
            double value = feat.at2(f, c);
            double* plane = &out.data()[((f * channels + c) * height) * width];
            for (std::size_t i = 0; i < height * width; ++i) {
                plane[i] = value;
            }
        }
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.rank() == b.rank(), "concat_channels: rank mismatch");
    require(a.rank() >= 2, "concat_channels: need a channel axis");
    for (std::size_t axis = 0; axis < a.rank(); ++axis) {
        if (axis != 1) {
            require(a.dim(axis) == b.dim(axis), "concat_channels: non-channel dims differ");
        }
    }
    std::size_t ca = a.dim(1), cb = b.dim(1);
    std::vector<std::size_t> shape = a.shape();
    shape[1] = ca + cb;

    // inner = product of dims after the channel axis, outer = dim 0
    std::size_t inner = 1;
    for (std::size_t axis = 2; axis < a.rank(); ++axis) {
        inner *= a.dim(axis);
    }
    std::size_t outer = a.dim(0);

    Tensor out(shape);
    for (std::size_t o = 0; o < outer; ++o) {
        double* dst = &out.data()[o * (ca + cb) * inner];
        std::memcpy(dst, &a.data()[o * ca * inner], ca * inner * sizeof(double));
        std::memcpy(dst + ca * inner, &b.data()[o * cb * inner], cb * inner * sizeof(double));
    }
    return out;
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
    require(x.rank() >= 2, "slice_channels: need a channel axis");
    require(begin + count <= x.dim(1), "slice_channels: slice out of range");
    std::size_t inner = 1;
    for (std::size_t axis = 2; axis < x.rank(); ++axis) {
        inner *= x.dim(axis);
    }
    std::size_t outer = x.dim(0);
    std::size_t cx = x.dim(1);

    std::vector<std::size_t> shape = x.shape();
    shape[1] = count;
    Tensor out(shape);
    for (std::size_t o = 0; o < outer; ++o) {
        std::memcpy(&out.data()[o * count * inner], &x.data()[(o * cx + begin) * inner],
                    count * inner * sizeof(double));
    }
    return out;
}

Tensor scale_add(const Tensor& a, double sa, const Tensor& b, double sb) {
    require_same_shape(a, b, "scale_add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = sa * a[i] + sb * b[i];
    }
    return out;
}

Tensor scaled(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = s * a[i];
    }
    return out;
}

double squared_norm(const Tensor& a) {
    double sum = 0.0;
    for (double x : a.data()) {
        sum += x * x;
    }
    return sum;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mean_squared_error");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

namespace {

constexpr char kMagic[4] = {'C', 'M', 'D', 'T'};
constexpr std::uint16_t kFormatVersion = 1;

void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    return v;
}

} // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kMagic, 4);
    write_u16(out, kFormatVersion);
    out.put(static_cast<char>(t.rank()));
    for (std::size_t d : t.shape()) {
        write_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double x : t.data()) {
        float f = static_cast<float>(x);
        std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
        write_u32(out, bits);
    }
}

Tensor read_tensor(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("tensor dump: bad magic");
    }
    std::uint16_t version = read_u16(in);
    if (version != kFormatVersion) {
        throw std::runtime_error("tensor dump: unsupported version " + std::to_string(version));
    }
    int rank = in.get();
    if (rank <= 0 || rank > 8) {
        throw std::runtime_error("tensor dump: bad rank");
    }
    std::vector<std::size_t> shape(static_cast<std::size_t>(rank));
    for (auto& d : shape) {
        d = read_u32(in);
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits = read_u32(in);
        t[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!in) {
        throw std::runtime_error("tensor dump: truncated payload");
    }
    return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_tensor(out, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open for reading: " + path);
    }
    return read_tensor(in);
}

} // namespace cmmd
