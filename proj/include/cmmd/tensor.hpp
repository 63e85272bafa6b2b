#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cmmd {

// Dense row-major multi-dimensional array of doubles. Video tensors are
// rank 4 (frames, channels, height, width), audio tensors rank 2
// (timesteps, channels). Channels live on axis 1 for both.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    // Rank-4 / rank-2 element access.
    double& at4(std::size_t f, std::size_t c, std::size_t h, std::size_t w);
    double at4(std::size_t f, std::size_t c, std::size_t h, std::size_t w) const;
    double& at2(std::size_t t, std::size_t c);
    double at2(std::size_t t, std::size_t c) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

using VideoTensor = Tensor; // rank 4: (F, C_v, H, W)
using AudioTensor = Tensor; // rank 2: (T, C_a)

struct ModalPair {
    Tensor video;
    Tensor audio;
};

void require_video(const Tensor& t, const char* what = "tensor");
void require_audio(const Tensor& t, const char* what = "tensor");
void require_same_shape(const Tensor& a, const Tensor& b, const char* what = "operands");

// Nearest-neighbor index used by temporal resampling: center-aligned
// mapping with ties broken toward the lower index.
std::size_t nn_index(std::size_t i, std::size_t src_len, std::size_t target_len);

// Resample a (L, C) sequence along axis 0 to (target_len, C). Output rows
// are copies of input rows; no blending.
Tensor nn_resample_time(const Tensor& x, std::size_t target_len);

// (F, C, H, W) -> (F, C) by arithmetic mean over the spatial plane.
Tensor spatial_mean_pool(const Tensor& v);

// (F, C) -> (F, C, H, W) by repeating each feature over the plane.
Tensor broadcast_spatial(const Tensor& feat, std::size_t height, std::size_t width);

// Concatenate along axis 1 (channels); all other axes must match.
// `a` occupies the leading channels of the result.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// First `count` channels of `x` along axis 1.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

// Elementwise helpers shared by the diffusion algebra.
Tensor scale_add(const Tensor& a, double sa, const Tensor& b, double sb); // sa*a + sb*b
Tensor scaled(const Tensor& a, double s);
double squared_norm(const Tensor& a);
double mean_squared_error(const Tensor& a, const Tensor& b);

// Versioned binary dump: magic "CMDT", version u16, rank u8, dims u32 LE,
// payload little-endian 32-bit floats in row-major order.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

} // namespace cmmd
