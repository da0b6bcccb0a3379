#pragma once

// Video samples, zero padding, fixed-length clip segmentation, and the
// training-time augmentations (random crop, horizontal flip, temporal
// start shift). None of these touch the labels.

#include <string>
#include <vector>

#include "aqa/score.hpp"
#include "aqa/tensor.hpp"

namespace aqa {

struct Defect {
    std::size_t clip = 0;     // 1-based clip index
    double deduction = 0.0;
};

struct VideoSample {
    Tensor frames;  // [C,T,H,W]
    ScoreLabel labels;
    std::string id;
    EventKind kind = EventKind::dive_like;
    std::vector<Defect> defects;  // ground-truth metadata for synthetic samples

    std::size_t channels() const { return frames.shape[0]; }
    std::size_t length() const { return frames.shape[1]; }
    std::size_t height() const { return frames.shape[2]; }
    std::size_t width() const { return frames.shape[3]; }
};

struct ClipSequence {
    std::vector<Tensor> clips;  // each [C,clip_len,h,w]
    std::size_t clip_len = 16;
    std::size_t stride = 16;
    std::string source_id;

    std::size_t count() const { return clips.size(); }
};

inline VideoSample pad_video(const VideoSample& sample, std::size_t target_len) {
    const std::size_t T = sample.length();
    if (target_len < T)
        throw std::invalid_argument("pad_video: target length " +
                                    std::to_string(target_len) + " < video length " +
                                    std::to_string(T));
    if (target_len == T) return sample;
    VideoSample out = sample;
    out.frames = Tensor({sample.channels(), target_len, sample.height(), sample.width()});
    const std::size_t frame_sz = sample.height() * sample.width();
    for (std::size_t c = 0; c < sample.channels(); ++c)
        for (std::size_t t = 0; t < T; ++t)
            std::copy_n(&sample.frames.data[(c * T + t) * frame_sz], frame_sz,
                        &out.frames.data[(c * target_len + t) * frame_sz]);
    return out;
}

inline std::size_t clip_count(std::size_t padded_len, std::size_t clip_len,
                              std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("segment_clips: zero stride");
    if (clip_len > padded_len)
        throw std::invalid_argument("segment_clips: clip length " +
                                    std::to_string(clip_len) + " > video length " +
                                    std::to_string(padded_len));
    return (padded_len - clip_len) / stride + 1;
}

// Clips start at offsets 0, stride, 2*stride, ...; trailing frames that do
// not fill a clip are dropped.
inline ClipSequence segment_clips(const VideoSample& sample, std::size_t clip_len = 16,
                                  std::size_t stride = 16) {
    const std::size_t n = clip_count(sample.length(), clip_len, stride);
    ClipSequence seq;
    seq.clip_len = clip_len;
    seq.stride = stride;
    seq.source_id = sample.id;
    const std::size_t C = sample.channels(), T = sample.length();
    const std::size_t frame_sz = sample.height() * sample.width();
    for (std::size_t i = 0; i < n; ++i) {
        Tensor clip({C, clip_len, sample.height(), sample.width()});
        const std::size_t t0 = i * stride;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < clip_len; ++t)
                std::copy_n(&sample.frames.data[(c * T + t0 + t) * frame_sz], frame_sz,
                            &clip.data[(c * clip_len + t) * frame_sz]);
        seq.clips.push_back(std::move(clip));
    }
    return seq;
}

struct AugmentOpts {
    std::size_t crop_h = 24;
    std::size_t crop_w = 24;
    double flip_prob = 0.5;
    std::size_t max_shift = 6;  // start-frame shift range, frames dropped then re-padded
};

// Deterministic given seed. Temporal shift drops the first k frames
// (k uniform in [0, max_shift]) and re-pads to the original length.
inline VideoSample augment(const VideoSample& sample, std::uint64_t seed,
                           const AugmentOpts& opts) {
    const std::size_t C = sample.channels(), T = sample.length(), H = sample.height(),
                      W = sample.width();
    if (opts.crop_h > H || opts.crop_w > W)
        throw std::invalid_argument("augment: crop extents exceed frame size");
    if (opts.max_shift >= T)
        throw std::invalid_argument("augment: max_shift >= video length");

    Rng rng(seed);
    const std::size_t off_h = opts.crop_h < H ? rng.index(H - opts.crop_h + 1) : 0;
    const std::size_t off_w = opts.crop_w < W ? rng.index(W - opts.crop_w + 1) : 0;
    const bool flip = rng.uniform() < opts.flip_prob;
    const std::size_t shift = opts.max_shift > 0 ? rng.index(opts.max_shift + 1) : 0;

    VideoSample out = sample;
    out.frames = Tensor({C, T, opts.crop_h, opts.crop_w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t src_t = t + shift;
            for (std::size_t h = 0; h < opts.crop_h; ++h)
                for (std::size_t w = 0; w < opts.crop_w; ++w) {
                    double v = 0.0;
                    if (src_t < T) {
                        const std::size_t sw =
                            flip ? off_w + opts.crop_w - 1 - w : off_w + w;
                        v = sample.frames.at4(c, src_t, off_h + h, sw);
                    }
                    out.frames.at4(c, t, h, w) = v;
                }
        }
    return out;
}

}  // namespace aqa
