#pragma once

// Dense row-major double tensors plus the AQTN on-disk format and a
// portable seeded RNG. Everything downstream builds on this.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace aqa {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)) {
        data.assign(numel(shape), fill);
    }

    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) {
            if (e == 0) throw std::invalid_argument("Tensor: zero extent");
            n *= e;
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // rank-4 accessor [a,b,c,d]
    std::size_t idx4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return ((a * shape[1] + b) * shape[2] + c) * shape[3] + d;
    }
    double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data[idx4(a, b, c, d)];
    }
    double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data[idx4(a, b, c, d)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// ---------------------------------------------------------------------------
// AQTN file format: magic "AQTN", u8 version (=1), u8 rank,
// rank x u32 LE extents, then float32 LE row-major payload.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff),
                 char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace detail

inline void save_aqtn(const Tensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_aqtn: cannot open " + path);
    os.write("AQTN", 4);
    os.put(char(1));
    if (t.rank() > 255) throw std::invalid_argument("save_aqtn: rank > 255");
    os.put(char(t.rank()));
    for (std::size_t e : t.shape) {
        if (e > 0xffffffffu) throw std::invalid_argument("save_aqtn: extent overflow");
        detail::put_u32_le(os, std::uint32_t(e));
    }
    for (double v : t.data) {
        float f = float(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32_le(os, bits);
    }
    if (!os) throw std::runtime_error("save_aqtn: write failed on " + path);
}

inline Tensor load_aqtn(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_aqtn: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "AQTN", 4) != 0)
        throw std::runtime_error("load_aqtn: bad magic in " + path);
    int version = is.get();
    if (version != 1) throw std::runtime_error("load_aqtn: unsupported version");
    int rank = is.get();
    if (rank < 0) throw std::runtime_error("load_aqtn: truncated header");
    std::vector<std::size_t> shape(static_cast<std::size_t>(rank), 0);
    for (auto& e : shape) e = detail::get_u32_le(is);
    Tensor t(shape);
    for (double& v : t.data) {
        std::uint32_t bits = detail::get_u32_le(is);
        float f;
        std::memcpy(&f, &bits, 4);
        v = double(f);
    }
    if (!is) throw std::runtime_error("load_aqtn: truncated payload in " + path);
    return t;
}

// ---------------------------------------------------------------------------
// Seeded RNG with a fixed bit-level contract so generated datasets and
// golden files do not depend on the standard library's distribution
// implementations.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        return std::size_t(uniform() * double(n)) % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace aqa
